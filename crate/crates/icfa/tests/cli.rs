//! End-to-end checks of the command-line interface.

use std::path::Path;
use std::process::Command;

fn icfa() -> Command {
    Command::new(env!("CARGO_BIN_EXE_icfa"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SWEEP_CFG: &str = "\
fixture paper-2user-2x2
modulation bpsk
snr_db 0,5
method high-snr
samples 200
seed 9
";

#[test]
fn sweep_reruns_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    write(&cfg, SWEEP_CFG);
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for (out, _) in [(&out_a, 0), (&out_b, 1)] {
        let status = icfa()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "sweep output differs between runs");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("snr_db,user,method,rate_bits,stderr,wall_ms\n"));
    // one row per (snr, user) plus the sum row
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn sweep_accepts_channel_files() {
    let dir = tempfile::tempdir().unwrap();
    let (ch, _) = icfa::channel::load_fixture("paper-2user-2x2").unwrap();
    let chan_path = dir.path().join("channel.txt");
    write(&chan_path, &icfa::channel::format_channel_text(&ch));
    let cfg = dir.path().join("sweep.cfg");
    write(
        &cfg,
        &format!(
            "channel_file {}\nmodulation bpsk\nsnr_db 5\nmethod identity\nsamples 100\nseed 1\n",
            chan_path.display()
        ),
    );
    let out = dir.path().join("out.csv");
    let status = icfa()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains(",identity,"));
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    write(&cfg, "fixture paper-2user-2x2\nmodulation bpsk\nsnr_db 5\nmethod identity\nbogus 1\n");
    let output = icfa()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("line 5"), "stderr: {err}");
}

#[test]
fn empty_snr_grid_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    write(&cfg, "fixture paper-2user-2x2\nmodulation bpsk\nmethod identity\n");
    let status = icfa().args(["sweep", "--config"]).arg(&cfg).status().unwrap();
    assert!(!status.success());
}

#[test]
fn gradcheck_passes_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grad.cfg");
    write(
        &cfg,
        "fixture paper-2user-2x2\nmodulation bpsk\nsnr_db 0\nmethod identity\nsamples 80\nseed 2\n",
    );
    let output = icfa()
        .args(["gradcheck", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "gradcheck failed:\n{stdout}");
    assert_eq!(stdout.matches("PASS").count(), 3, "{stdout}");
}

#[test]
fn optimize_writes_feasible_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("opt.cfg");
    write(
        &cfg,
        "fixture paper-2user-2x2\nmodulation bpsk\nsnr_db 5\nmethod finite-opt\n\
         samples 150\nseed 6\nrestarts 1\nrel_tol 5e-3\n",
    );
    let out = dir.path().join("opt.txt");
    let status = icfa()
        .args(["optimize", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(&out).unwrap();
    // feasibility: every reported trace stays within its budget
    for line in report.lines().filter(|l| l.starts_with("tr(G_")) {
        let nums: Vec<f64> = line
            .split(['=', '(', ')'])
            .filter_map(|tok| tok.trim().strip_suffix("P_1").map(|_| f64::NAN).or(None))
            .collect();
        let _ = nums;
        let mut it = line.split('=');
        it.next();
        let tr: f64 = it
            .next()
            .unwrap()
            .split_whitespace()
            .next()
            .unwrap()
            .parse()
            .unwrap();
        let p: f64 = line
            .rsplit('=')
            .next()
            .unwrap()
            .trim()
            .trim_end_matches(')')
            .parse()
            .unwrap();
        assert!(tr <= p + 1e-6, "infeasible trace in report: {line}");
    }
    let trace = std::fs::read_to_string(dir.path().join("opt.trace.csv")).unwrap();
    let mut rows = trace.lines().skip(1).map(|l| {
        let mut cols = l.split(',');
        cols.next();
        cols.next();
        let wsr: f64 = cols.next().unwrap().parse().unwrap();
        let stderr: f64 = cols.next().unwrap().parse().unwrap();
        (wsr, stderr)
    });
    let mut prev: Option<(f64, f64)> = None;
    let mut count = 0;
    for cur in rows.by_ref() {
        if let Some(last) = prev {
            let band = 3.0 * (last.1 * last.1 + cur.1 * cur.1).sqrt();
            assert!(cur.0 >= last.0 - band, "trace dips: {} -> {}", last.0, cur.0);
        }
        prev = Some(cur);
        count += 1;
    }
    assert!(count >= 1);
}

#[test]
fn detect_demo_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.cfg");
    write(
        &cfg,
        "fixture paper-2user-2x2\nmodulation qpsk\nsnr_db 15\nmethod identity\nseed 5\n",
    );
    let run = || {
        let output = icfa()
            .args(["detect-demo", "--config"])
            .arg(&cfg)
            .output()
            .unwrap();
        assert!(output.status.success());
        output.stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn ia_loss_report_prints_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ia.cfg");
    write(
        &cfg,
        "fixture paper-3user-2x2\nmodulation qpsk\nsnr_db 0\nmethod ia-loss\n",
    );
    let output = icfa().args(["ia-loss", "--config"]).arg(&cfg).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("limiting average sum-rate = 6.000000"), "{stdout}");
    assert!(stdout.contains("eta = 1"), "{stdout}");
}
