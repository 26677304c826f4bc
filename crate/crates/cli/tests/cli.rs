use std::path::Path;
use std::process::{Command, Output};

use nea::data::{write_merl, MerlTable};

fn nea(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nea"))
        .current_dir(dir)
        .env_remove("NEAM_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn value<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in\n{out}"))
}

/// Runs the echoed command line (first output line) again.
fn replay(dir: &Path, out: &str) -> String {
    let line = out.lines().next().unwrap().strip_prefix("# nea ").expect("config echo");
    let args: Vec<&str> = line.split_whitespace().collect();
    ok(nea(dir, &args))
}

#[test]
fn gen_fit_eval_slice_export_pipeline() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let g = ok(nea(d, &["gen", "--kind", "corrupted:fresnel", "--materials", "2", "--samples", "300", "--out", "data"]));
    assert!(g.contains("data/corrupted-1.neas 300"));

    let fit = ok(nea(
        d,
        &["fit", "--model", "analytical:ggx", "--data", "data/corrupted-0.neas", "--epochs", "40", "--lr", "1e-2", "--out", "f.txt"],
    ));
    let text = std::fs::read_to_string(d.join("f.txt")).unwrap();
    assert!(text.contains("rho_s.g=") && text.contains("z[26]=") && text.contains("epochs_run=40"));
    replay(d, &fit);
    assert_eq!(std::fs::read_to_string(d.join("f.txt")).unwrap(), text, "echo must reproduce the fit");

    let e = ok(nea(d, &["eval", "--model", "analytical:ggx", "--fit", "f.txt", "--data", "data/corrupted-0.neas"]));
    assert_eq!(value(&e, "samples"), "300");
    let fit_loss: f64 = text.lines().find_map(|l| l.strip_prefix("final_loss=")).unwrap().parse().unwrap();
    let eval_loss: f64 = value(&e, "mean_loss").parse().unwrap();
    assert!((fit_loss - eval_loss).abs() <= 1e-8 * fit_loss, "{fit_loss} vs {eval_loss}");

    let s = ok(nea(d, &["slice", "--model", "analytical:ggx", "--fit", "f.txt", "--wo", "30,45", "--res", "16", "--out", "s.pfm"]));
    assert_eq!(value(&s, "width"), "16");
    let pfm = std::fs::read(d.join("s.pfm")).unwrap();
    assert!(pfm.starts_with(b"PF\n16 16\n-1.0\n"));
    assert_eq!(pfm.len(), 14 + 16 * 16 * 12);
    ok(nea(d, &["slice", "--model", "analytical:ggx", "--fit", "f.txt", "--res", "8", "--out", "h.pfm"]));

    let x = ok(nea(d, &["export", "--model", "analytical:ggx", "--fit", "f.txt", "--out", "b.glsl"]));
    assert_eq!(value(&x, "params"), "39");
    let src = std::fs::read_to_string(d.join("b.glsl")).unwrap();
    let prog = nea::runtime::ShaderProgram::parse(&src).unwrap();
    assert_eq!(prog.param_count(), 39);
}

#[test]
fn enhance_report_and_model() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let args = [
        "enhance", "--model", "ggx", "--data", "synthetic:planted-fresnel@200", "--epochs-per-stage", "1", "--warmup-epochs",
        "1", "--max-stages", "1", "--out", "m.neam", "--checkpoint", "ck",
    ];
    let out = ok(nea(d, &args));
    assert!(out.contains("stage 1 current 00000000000 (12 candidates)"), "{out}");
    assert!(out.contains("final_state"));
    assert!(d.join("ck/search.neac").exists());
    let model = nea::runtime::load_model(d.join("m.neam")).unwrap();
    assert_eq!(model.graph.n_slots(), 11);

    // a finished checkpoint resumes to the same report
    let again = ok(nea(d, &args));
    assert_eq!(again, out);

    let zero = ok(nea(
        d,
        &["enhance", "--data", "synthetic:planted-fresnel@200", "--epochs-per-stage", "1", "--warmup-epochs", "1", "--max-modules", "0", "--out", "z.neam"],
    ));
    assert!(zero.contains("final_state 00000000000"), "{zero}");
    assert!(zero.contains("(1 candidates)"));
}

#[test]
fn fixed_bit_and_threads_are_echoed() {
    let t = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nea"))
        .current_dir(t.path())
        .env("NEAM_THREADS", "1")
        .args([
            "enhance", "--data", "synthetic:planted-fresnel@100", "--epochs-per-stage", "1", "--warmup-epochs", "0",
            "--max-stages", "1", "--fix-bit", "F=0", "--out", "m.neam",
        ])
        .output()
        .unwrap();
    let out = ok(o);
    let echo = out.lines().next().unwrap();
    assert!(echo.contains("--threads 1") && echo.contains("--fix-bit F=0"), "{echo}");
    // slot 3 pinned: the 12 neighbours lose the one that flips it
    assert!(out.contains("(11 candidates)"), "{out}");
}

#[test]
fn merl_commands() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let table = MerlTable::filled([0.5, 0.25, 0.125]);
    write_merl(&table, d.join("grey.binary")).unwrap();
    let info = ok(nea(d, &["merl", "--info", "grey.binary"]));
    assert_eq!(value(&info, "cells"), "1458000");
    assert_eq!(value(&info, "valid_cells"), "1458000");
    let conv = ok(nea(d, &["merl", "--to-sampleset", "grey.binary", "50", "grey.neas"]));
    assert_eq!(value(&conv, "samples"), "50");
    let set = nea::data::read_sampleset(d.join("grey.neas")).unwrap();
    assert_eq!(set.len(), 50);
    let want = table.cell_value(0);
    for (got, want) in set.samples[0].value.iter().zip(want) {
        assert_eq!(*got, want as f32 as f64);
    }
    let fit = ok(nea(d, &["fit", "--model", "analytical:ggx", "--data", "merl:grey.binary@100", "--epochs", "2"]));
    assert!(fit.contains("# material grey"));
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let code = |args: &[&str]| nea(d, args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["fit", "--bogus"]), 1);
    assert_eq!(code(&["gen", "--kind", "nope", "--out", "x"]), 1);
    assert_eq!(code(&["enhance", "--data", "synthetic:planted-nothing", "--out", "m"]), 1);
    assert_eq!(code(&["enhance", "--model", "phong", "--data", "x.neas", "--out", "m"]), 1);
    assert_eq!(code(&["merl"]), 1);

    let missing = nea(d, &["fit", "--model", "analytical:ggx", "--data", "missing.neas"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.neas"));
    std::fs::write(d.join("junk.neam"), b"NEAMxxxx").unwrap();
    assert_eq!(code(&["fit", "--model", "junk.neam", "--data", "synthetic:ggx@10"]), 2);
    std::fs::write(d.join("bad.txt"), "rho_d.r=0.1\n").unwrap();
    assert_eq!(code(&["eval", "--model", "analytical:ggx", "--fit", "bad.txt", "--data", "synthetic:ggx@10", "--material", "ggx-0"]), 2);
    assert_eq!(code(&["fit", "--model", "analytical:ggx", "--data", "synthetic:ggx@10"]), 1, "several materials, none picked");

    assert_eq!(code(&["fit", "--model", "analytical:ggx", "--data", "synthetic:ggx@10", "--lr", "-1"]), 1);

    // overflowing module weights make every prediction non-finite
    let mut m = nea::graph::EnhancedModel::analytical(nea::graph::build_ggx_graph(), 27);
    m.enable(3, 0);
    let w = vec![1e200; m.total_weights()];
    m.set_flat_weights(&w);
    nea::runtime::save_model(&m, d.join("huge.neam")).unwrap();
    std::fs::write(d.join("init.txt"), nea::runtime::FitResult::initial(27).to_text()).unwrap();
    let args = ["eval", "--model", "huge.neam", "--fit", "init.txt", "--data", "synthetic:ggx@10", "--material", "ggx-0"];
    assert_eq!(code(&args), 3);
    let fit = ["fit", "--model", "huge.neam", "--data", "synthetic:ggx@10", "--material", "ggx-0", "--epochs", "2"];
    assert_eq!(code(&fit), 3);
}
