// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use srncl_core::fault::sever_request;
use srncl_core::netlist::{build_sr_ncl_cla, invert_lsu_carry};
use srncl_core::{Netlist, PartitionSpec};
use tempfile::TempDir;

fn srncl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srncl"))
        .args(args)
        .env("SRNCL_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn asset(name: &str) -> String {
    format!("{}/../../assets/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn write_netlist(dir: &Path, name: &str, n: &Netlist) -> String {
    let p = dir.join(name);
    std::fs::write(&p, n.to_json().unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn sr8() -> Netlist {
    build_sr_ncl_cla(8, PartitionSpec::new(8, 3).unwrap(), 1).unwrap()
}

#[test]
fn gen_sr_5_3() {
    let d = TempDir::new().unwrap();
    let o = srncl(d.path(), &["gen", "--arch", "sr", "--width", "8", "--lsu", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let n = Netlist::load(&d.path().join("netlist.json")).unwrap();
    assert_eq!(n.partition, Some(PartitionSpec::new(8, 3).unwrap()));
    let audit = n.audit_duplication();
    assert_eq!(audit.msu_bits, [5, 5]);
    assert_eq!(audit.lsu_bits, 3);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("TH22"), "{text}");
}

#[test]
fn gen_rejects_full_width_lsu() {
    let d = TempDir::new().unwrap();
    let o = srncl(d.path(), &["gen", "--arch", "sr", "--width", "8", "--lsu", "8"]);
    assert_eq!(code(&o), 2);
    assert!(!d.path().join("netlist.json").exists());
}

#[test]
fn gen_rejects_partition_without_sr() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&srncl(d.path(), &["gen", "--arch", "dmr", "--lsu", "3"])), 2);
}

#[test]
fn gen_dmr16_to_explicit_path() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("sub/dmr16.json");
    let o = srncl(d.path(), &["gen", "--arch", "dmr", "--width", "16", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let n = Netlist::load(&out).unwrap();
    assert_eq!(n.width, 16);
    assert_eq!(n.partition, None);
}

#[test]
fn sim_fault_free_sr() {
    let d = TempDir::new().unwrap();
    let net = write_netlist(d.path(), "sr.json", &sr8());
    let o = srncl(d.path(), &["sim", "--netlist", &net, "--random", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let tokens = json(&d.path().join("tokens.json"));
    assert_eq!(tokens["status"], "completed");
    assert_eq!(tokens["values"].as_array().unwrap().len(), 100);
    let summary = json(&d.path().join("summary.json"));
    assert_eq!(summary["mismatches"], 0);
    assert!(summary["t_dd_avg"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["settings"]["operands"]["source"], "random");
}

#[test]
fn sim_explicit_operands_and_trace() {
    let d = TempDir::new().unwrap();
    let o = srncl(d.path(), &["sim", "--operands", "3+5,200+55", "--trace"]);
    assert_eq!(code(&o), 0);
    let tokens = json(&d.path().join("tokens.json"));
    assert_eq!(tokens["values"], serde_json::json!([8, 255]));
    let trace = std::fs::read_to_string(d.path().join("trace.txt")).unwrap();
    let first = trace.lines().next().unwrap();
    assert_eq!(first.split(' ').count(), 3);
}

#[test]
fn sim_token_files_ignore_delays() {
    let root = TempDir::new().unwrap();
    let net = write_netlist(root.path(), "sr.json", &sr8());
    let mut files = Vec::new();
    for seed in 0..20 {
        let d = root.path().join(format!("s{seed}"));
        let o = srncl(
            &d,
            &["sim", "--netlist", &net, "--random", "20", "--delay", "random", "--delay-seed", &seed.to_string()],
        );
        assert_eq!(code(&o), 0);
        files.push(std::fs::read(d.join("tokens.json")).unwrap());
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn sim_exit_codes() {
    let d = TempDir::new().unwrap();
    let net = write_netlist(d.path(), "sr.json", &sr8());
    assert_eq!(code(&srncl(d.path(), &["sim", "--netlist", &net, "--max-time", "1"])), 5);

    let (broken, _) = sever_request(&sr8()).unwrap();
    let severed = write_netlist(d.path(), "severed.json", &broken);
    assert_eq!(code(&srncl(d.path(), &["sim", "--netlist", &severed, "--random", "3"])), 4);

    let wrong = write_netlist(d.path(), "inverted.json", &invert_lsu_carry(&sr8()).unwrap());
    assert_eq!(code(&srncl(d.path(), &["sim", "--netlist", &wrong, "--operands", "1+1"])), 3);

    assert_eq!(code(&srncl(d.path(), &["sim", "--netlist", "missing.json"])), 2);
    assert_eq!(code(&srncl(d.path(), &["sim", "--delay", "gaussian"])), 2);
}

#[test]
fn exhaustive_is_capped() {
    let d = TempDir::new().unwrap();
    let o = srncl(d.path(), &["sim", "--arch", "sr", "--width", "10", "--exhaustive"]);
    assert_eq!(code(&o), 2);
    let o = srncl(d.path(), &["sim", "--arch", "sr", "--width", "4", "--lsu", "2", "--exhaustive"]);
    assert_eq!(code(&o), 0);
    let tokens = json(&d.path().join("tokens.json"));
    assert_eq!(tokens["values"].as_array().unwrap().len(), 512);
}

#[test]
fn campaign_control_path_recovers() {
    let d = TempDir::new().unwrap();
    let net = write_netlist(d.path(), "sr.json", &sr8());
    let o = srncl(d.path(), &["campaign", "--netlist", &net, "--role", "CD", "--seeds", "0..2", "--random", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(d.path().join("campaign.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "site_id,role,copy,phase,scenario,seed,operand_a,operand_b,outcome,error_magnitude,time_to_recover"
    );
    assert!(lines.all(|l| l.contains(",CD,") && l.contains(",ControlPath,") && l.contains(",ExactRecovery,")));
    let summary = json(&d.path().join("campaign_summary.json"));
    assert_eq!(summary["violations"], 0);
    assert_eq!(summary["settings"]["campaign"]["seeds"], serde_json::json!([0, 1]));
}

#[test]
fn campaign_outputs_are_reproducible() {
    let root = TempDir::new().unwrap();
    let net = write_netlist(root.path(), "sr.json", &sr8());
    let mut out = Vec::new();
    for run in ["x", "y"] {
        let d = root.path().join(run);
        let o = srncl(
            &d,
            &["campaign", "--netlist", &net, "--role", "CL_LSU", "--phase", "DATA", "--seeds", "0..2", "--random", "2"],
        );
        assert_eq!(code(&o), 0);
        out.push((
            std::fs::read(d.join("campaign.csv")).unwrap(),
            std::fs::read(d.join("campaign_summary.json")).unwrap(),
        ));
    }
    assert_eq!(out[0], out[1]);
}

#[test]
fn campaign_failure_still_writes_csv() {
    let d = TempDir::new().unwrap();
    let (broken, _) = sever_request(&sr8()).unwrap();
    let net = write_netlist(d.path(), "severed.json", &broken);
    let o = srncl(
        d.path(),
        &["campaign", "--netlist", &net, "--role", "CD", "--copy", "a", "--seeds", "0", "--random", "1"],
    );
    assert_eq!(code(&o), 6);
    assert!(d.path().join("campaign.csv").exists());
}

#[test]
fn compare_orders_transistors() {
    let d = TempDir::new().unwrap();
    let o = srncl(d.path(), &["compare", "--design", "dmr8,sr8-5|3", "--random", "20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&d.path().join("comparison.json"));
    let rows = v["rows"].as_array().unwrap();
    assert!(rows[1]["transistors"].as_u64() < rows[0]["transistors"].as_u64());
    let csv = std::fs::read_to_string(d.path().join("comparison.csv")).unwrap();
    assert!(csv.starts_with("label,gates,transistors,t_dd_units,transitions_per_op\n"));
    assert_eq!(code(&srncl(d.path(), &["compare", "--design", "sr8-4|3"])), 2);
    assert_eq!(code(&srncl(d.path(), &["compare", "--design", "dmr8,dmr16"])), 2);
}

#[test]
fn image_sweep() {
    let d = TempDir::new().unwrap();
    let (a, b) = (asset("exposure_a.pgm"), asset("exposure_b.pgm"));
    let o = srncl(d.path(), &["image", "--a", &a, "--b", &b]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.path().join("reference.pgm").exists());
    let l8 = json(&d.path().join("quality_L8.json"));
    assert!(["high", "acceptable"].contains(&l8["band"].as_str().unwrap()));
    let ssims: Vec<f64> = [8, 10, 12, 13, 14]
        .iter()
        .map(|l| {
            assert!(d.path().join(format!("recon_L{l}.pgm")).exists());
            json(&d.path().join(format!("quality_L{l}.json")))["ssim"].as_f64().unwrap()
        })
        .collect();
    assert!(ssims.windows(2).all(|w| w[1] <= w[0]), "{ssims:?}");
}

#[test]
fn image_requires_inputs() {
    let d = TempDir::new().unwrap();
    assert_ne!(code(&srncl(d.path(), &["image"])), 0);
    assert_ne!(code(&srncl(d.path(), &["image", "--a", "none.pgm", "--b", "none.pgm"])), 0);
}

#[test]
fn uncorrupted_reconstruction_reports_infinite_psnr() {
    let d = TempDir::new().unwrap();
    let (a, b) = (asset("exposure_a.pgm"), asset("exposure_b.pgm"));
    let o = srncl(d.path(), &["image", "--a", &a, "--b", &b, "--partitions", "8", "--flip-probability", "0"]);
    assert_eq!(code(&o), 0);
    let q = json(&d.path().join("quality_L8.json"));
    assert_eq!(q["psnr_db"], "inf");
    assert_eq!(q["ssim"], 1.0);
}

#[test]
fn flags_override_config_file() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"arch": "sr", "width": 16, "lsu": 5}"#).unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&srncl(d.path(), &["--config", c, "gen"])), 0);
    let n = Netlist::load(&d.path().join("netlist.json")).unwrap();
    assert_eq!((n.width, n.partition.unwrap().l), (16, 5));
    assert_eq!(code(&srncl(d.path(), &["--config", c, "gen", "--lsu", "6"])), 0);
    let n = Netlist::load(&d.path().join("netlist.json")).unwrap();
    assert_eq!((n.width, n.partition.unwrap().l), (16, 6));

    std::fs::write(&cfg, r#"{"widht": 16}"#).unwrap();
    assert_eq!(code(&srncl(d.path(), &["--config", c, "gen"])), 2);
}

#[test]
fn out_dir_flag_beats_environment() {
    let d = TempDir::new().unwrap();
    let other = d.path().join("flag");
    let o = srncl(d.path(), &["--out-dir", other.to_str().unwrap(), "gen", "--arch", "ncl", "--width", "4"]);
    assert_eq!(code(&o), 0);
    assert!(other.join("netlist.json").exists());
    assert!(!d.path().join("netlist.json").exists());
}
