use super::*;
use crate::nonlinear::InitialGuess;

fn nus(list: &[&str]) -> Vec<Nu> {
    list.iter().map(|s| s.parse().unwrap()).collect()
}

/// Every preset parameter with the value it must carry.
#[test]
fn preset_fidelity_table() {
    let low = nus(&["1", "1/10", "1/20", "1/30", "1/40"]);
    let high = nus(&["1/50", "1/60", "1/70", "1/80", "1/90"]);
    let fig4: Vec<Nu> = low.iter().chain(&high).copied().collect();
    let sin = Forcing::SinSum;
    let sq64 = Geometry::UnitSquare { n: 64 };

    let table: [(&str, Geometry, Vec<Nu>, Vec<OutflowKind>, Forcing, Option<&str>, Mode); 7] = [
        ("fig2_cbc", sq64.clone(), low.clone(), vec![], sin, None, Mode::Stationary),
        ("fig2_dn", sq64.clone(), low.clone(), vec![], sin, None, Mode::Stationary),
        ("fig3_cbc", sq64.clone(), high.clone(), vec![], sin, None, Mode::Stationary),
        ("fig3_dn", sq64.clone(), high.clone(), vec![], sin, None, Mode::Stationary),
        ("fig4_sweep", sq64.clone(), fig4, vec![OutflowKind::Cbc, OutflowKind::Dn], sin, None, Mode::Stationary),
        (
            "fig6_all",
            Geometry::Bifurcation { h: 0.05 },
            nus(&["1/250", "1/1000"]),
            OutflowKind::ALL.to_vec(),
            Forcing::Zero,
            Some("poiseuille_half"),
            Mode::Stationary,
        ),
        (
            "fig7_all",
            Geometry::Cylinder { h: 0.04, h_far: None },
            vec![],
            OutflowKind::ALL.to_vec(),
            Forcing::Zero,
            Some("poiseuille_unit"),
            Mode::Transient,
        ),
    ];
    for (name, geom, nu_list, kinds, forcing, inflow, mode) in table {
        let s = preset(name).unwrap();
        assert_eq!(s.name, name);
        assert_eq!(s.geometry, geom, "{name}");
        assert_eq!(s.sweep.nu, nu_list, "{name}");
        assert_eq!(s.sweep.outflow, kinds, "{name}");
        assert_eq!(s.physics.forcing, forcing, "{name}");
        assert_eq!(s.physics.inflow.as_deref(), inflow, "{name}");
        assert_eq!(s.physics.mode, mode, "{name}");
        assert_eq!(s.output.gamma_tag, "OUT");
    }
    assert_eq!(preset("fig2_cbc").unwrap().physics.outflow, OutflowKind::Cbc);
    assert_eq!(preset("fig2_dn").unwrap().physics.outflow, OutflowKind::Dn);
    assert_eq!(preset("fig3_dn").unwrap().solver.initial_guess, InitialGuess::Zero);
    assert_eq!(preset("fig3_cbc").unwrap().solver.initial_guess, InitialGuess::Continuation);

    let f7 = preset("fig7_all").unwrap();
    assert_eq!(f7.physics.nu, Nu(1.0 / 250.0));
    let t = f7.time.unwrap();
    assert_eq!(t.captures, vec![4.0, 24.0]);
    assert_eq!((t.dt, t.t_final, t.initial), (0.01, 24.0, InitialData::Lifting));
    let c = f7.geometry.constants();
    assert_eq!(c["cylinder_radius"], 0.15);

    let m = preset("mms_convergence").unwrap();
    assert_eq!(m.sweep.n, vec![8, 16, 32]);
    assert_eq!(m.physics.forcing, Forcing::Mms);
}

#[test]
fn every_preset_parses_and_round_trips() {
    for name in PRESET_NAMES {
        let s = preset(name).unwrap();
        let again = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(s, again, "{name}");
        assert_eq!(again.to_toml(), s.to_toml());
    }
}

#[test]
fn viscosity_text_forms() {
    assert_eq!("1/250".parse::<Nu>().unwrap(), Nu(1.0 / 250.0));
    assert_eq!("0.5".parse::<Nu>().unwrap(), Nu(0.5));
    assert_eq!(Nu(1.0 / 30.0).to_string(), "1/30");
    assert_eq!(Nu(1.0).to_string(), "1");
    assert_eq!(Nu(0.3).to_string(), "0.3");
    assert_eq!(Nu(1.0 / 90.0).slug(), "1_90");
    assert_eq!(Nu(1.0).plot_x(), 0.0);
    assert!((Nu(1.0 / 90.0).plot_x() - 9.0).abs() < 1e-12);
    assert!("abc".parse::<Nu>().is_err());
}

#[test]
fn negative_viscosity_is_rejected() {
    let text = preset_source("fig2_cbc").unwrap();
    let bad = apply_overrides(text, &["physics.nu=-1".into()]).unwrap();
    assert!(matches!(Scenario::from_toml(&bad), Err(ScenarioError::Invalid(_))));
    let bad = apply_overrides(text, &["sweep.nu=[\"1\", -0.5]".into()]).unwrap();
    assert!(matches!(Scenario::from_toml(&bad), Err(ScenarioError::Invalid(_))));
}

#[test]
fn unknown_preset_lists_available_ones() {
    let e = load_scenario("fig9", &[]).unwrap_err();
    let msg = e.to_string();
    assert!(matches!(e, ScenarioError::UnknownPreset { .. }));
    for name in PRESET_NAMES {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn malformed_and_unknown_fields_are_reported() {
    assert!(matches!(Scenario::from_toml("name = "), Err(ScenarioError::Parse(_))));
    let text = format!("{}\nbogus = 1\n", preset_source("fig2_cbc").unwrap());
    assert!(matches!(Scenario::from_toml(&text), Err(ScenarioError::Parse(_))));
    let text = apply_overrides(preset_source("fig6_all").unwrap(), &["physics.inflow=plug".into()]).unwrap();
    assert!(Scenario::from_toml(&text).unwrap_err().to_string().contains("poiseuille_half"));
    let text = apply_overrides(preset_source("fig2_cbc").unwrap(), &["physics.mode=transient".into()]).unwrap();
    assert!(matches!(Scenario::from_toml(&text), Err(ScenarioError::Invalid(_))));
}

#[test]
fn overrides_reach_nested_fields() {
    let s = load_scenario(
        "fig7_all",
        &["geometry.h=0.1".into(), "time.t_final=0.5".into(), "time.captures=[0.5]".into(), "sweep.outflow=[\"dn\"]".into(), "physics.nu=1/100".into()],
    )
    .unwrap();
    assert_eq!(s.geometry, Geometry::Cylinder { h: 0.1, h_far: None });
    assert_eq!(s.time.as_ref().unwrap().t_final, 0.5);
    assert_eq!(s.sweep.outflow, vec![OutflowKind::Dn]);
    assert_eq!(s.physics.nu, Nu(0.01));
    assert!(matches!(load_scenario("fig2_cbc", &["name".into()]), Err(ScenarioError::Override(..))));
    assert!(matches!(load_scenario("fig2_cbc", &["name.x=1".into()]), Err(ScenarioError::Override(..))));
}

#[test]
fn sweep_points_are_ordered_and_named() {
    let s = preset("fig4_sweep").unwrap();
    let pts = s.points();
    assert_eq!(pts.len(), 20);
    assert_eq!(pts[0].id, "000-cbc-nu1");
    assert_eq!(pts[9].id, "009-cbc-nu1_90");
    assert_eq!(pts[10].outflow, OutflowKind::Dn);
    let ids: std::collections::HashSet<_> = pts.iter().map(|p| p.id.clone()).collect();
    assert_eq!(ids.len(), pts.len());
    let m = preset("mms_convergence").unwrap().points();
    assert_eq!(m.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["000-cbc-nu1_10-n8", "001-cbc-nu1_10-n16", "002-cbc-nu1_10-n32"]);
    assert_eq!(preset("fig7_all").unwrap().points().len(), 3);
}

#[test]
fn file_geometry_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    crate::mesh::save_mesh(&crate::mesh::generate_unit_square(3).unwrap(), dir.path().join("sq.msh")).unwrap();
    let text = "name = \"from_file\"\n[geometry]\nkind = \"file\"\npath = \"sq.msh\"\n\
                [physics]\nnu = 1\nforcing = \"zero\"\noutflow = \"cbc\"\nmode = \"stationary\"\n";
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, text).unwrap();
    let s = load_scenario(cfg.to_str().unwrap(), &[]).unwrap();
    assert_eq!(s.geometry, Geometry::File { path: dir.path().join("sq.msh") });
    assert_eq!(s.geometry.build().unwrap().n_triangles(), 18);
}

fn small(name: &str, extra: &[&str]) -> Scenario {
    let o: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    load_scenario(name, &o).unwrap()
}

#[test]
fn run_is_deterministic_and_complete() {
    let s = small("fig2_cbc", &["geometry.n=4", "sweep.nu=[\"1\", \"1/10\"]", "output.stream_function=true"]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run(&s, &RunOptions { out: a.path().into(), workers: 2 }).unwrap();
    let mb = run(&s, &RunOptions { out: b.path().into(), workers: 2 }).unwrap();
    assert!(ma.all_succeeded());
    assert_eq!(ma, mb);
    for f in ["manifest.json", "results.csv", "gamma.csv", "scenario.toml", "mesh_0.msh", "points/001-cbc-nu1_10/solution.vtk"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let gamma = std::fs::read_to_string(a.path().join("gamma.csv")).unwrap();
    assert!(gamma.starts_with(&format!("{GAMMA_HEADER}\n")));
    assert_eq!(gamma.lines().count(), 3);
    assert!(gamma.lines().nth(1).unwrap().starts_with("0.0,"));
    assert_eq!(RunManifest::load(a.path()).unwrap(), ma);
    assert_eq!(ma.config_sha256, crate::output::sha256_hex(s.to_toml().as_bytes()));
    assert!(ma.points.iter().all(|p| p.energy_defect.unwrap() < 1e-8));
    let vtk = std::fs::read_to_string(a.path().join("points/000-cbc-nu1/solution.vtk")).unwrap();
    assert!(vtk.contains("SCALARS stream_function"));
}

#[test]
fn diverging_point_is_recorded_without_aborting() {
    let s = small("fig3_dn", &["geometry.n=4", "sweep.nu=[\"1\", \"1/10\"]", "solver.max_iters=2"]);
    let dir = tempfile::tempdir().unwrap();
    let m = run(&s, &RunOptions { out: dir.path().into(), workers: 1 }).unwrap();
    let st: Vec<PointStatus> = m.points.iter().map(|p| p.status).collect();
    assert!(st.contains(&PointStatus::Diverged), "{st:?}");
    assert!(!m.all_succeeded());
    for p in &m.points {
        assert!(dir.path().join(&p.dir).join("newton.csv").exists());
    }
    let results = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + m.points.len());
    assert!(results.contains("diverged"));
}

#[test]
fn transient_run_writes_captures() {
    let s = small(
        "fig7_all",
        &["geometry.h=0.12", "time.dt=0.1", "time.t_final=0.3", "time.captures=[0.1, 0.3]", "sweep.outflow=[\"ddn\"]"],
    );
    let dir = tempfile::tempdir().unwrap();
    let m = run(&s, &RunOptions { out: dir.path().into(), workers: 1 }).unwrap();
    assert!(m.all_succeeded(), "{:?}", m.points[0].message);
    let p = &m.points[0];
    let tr = p.transient.as_ref().unwrap();
    assert_eq!(tr.steps_taken, 3);
    assert_eq!(tr.captures.iter().map(|c| c.step).collect::<Vec<_>>(), vec![1, 3]);
    for c in &tr.captures {
        let text = std::fs::read_to_string(dir.path().join(&p.dir).join(&c.file)).unwrap();
        assert!(text.contains("SCALARS stream_function"));
    }
    assert!(dir.path().join(&p.dir).join("diagnostics.csv").exists());
    assert!(!dir.path().join("gamma.csv").exists());
    assert_eq!(m.meshes[0].constants["cylinder_radius"], 0.15);
}

#[test]
fn diagnostics_header_matches_fields() {
    let d = crate::timestepper::StepDiagnostics {
        step: 1,
        t: 0.1,
        div_residual: 0.0,
        outflow_flux: 0.0,
        l2_u: 0.0,
        rate: 0.0,
        projected_feet: 0,
        cfl: 0.0,
        outflow_cfl: 0.0,
    };
    let text = crate::output::csv_string(&[d]).unwrap();
    assert_eq!(text.lines().next().unwrap(), run::DIAGNOSTICS_HEADER);
}

#[test]
fn mms_run_writes_orders() {
    let s = small("mms_convergence", &["sweep.n=[4, 8]"]);
    let dir = tempfile::tempdir().unwrap();
    let m = run(&s, &RunOptions { out: dir.path().into(), workers: 1 }).unwrap();
    assert!(m.all_succeeded());
    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    let order: f64 = lines[2].split(',').nth(6).unwrap().parse().unwrap();
    assert!(order > 2.0, "{text}");
}
