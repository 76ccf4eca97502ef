//! Helpers for driving the `graphsr` binary.
#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use graphsr_core::synth::{random_geometric_graph, sparse_bandlimited};
use graphsr_core::{io, SignalMatrix, Spectrum};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphsr"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn graphsr")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "graphsr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes `graph.grf` and `truth.csv` for a synthetic bandlimited instance.
pub fn write_instance(dir: &Path, n: usize, k: usize, p: usize, seed: u64) -> SignalMatrix {
    let (g, _) = random_geometric_graph(n, 0.35, seed).unwrap();
    g.write_grf(dir.join("graph.grf")).unwrap();
    let s = Spectrum::compute(&g.laplacian(), k).unwrap();
    let f = sparse_bandlimited(&s, p, (k / 2).max(1), seed + 1).unwrap();
    io::write_signal(dir.join("truth.csv"), &f).unwrap();
    f
}

/// A `graphsr serve` child process on an ephemeral port, killed on drop.
pub struct Server {
    child: Child,
    pub url: String,
}

impl Server {
    pub fn start(data_dir: &Path) -> Server {
        Server::start_with(data_dir, &[])
    }

    pub fn start_with(data_dir: &Path, env: &[(&str, &Path)]) -> Server {
        let mut cmd = bin();
        cmd.args(["serve", "--port", "0", "--data-dir", p(data_dir)]).env_remove("GRAPHSR_DATA_DIR");
        for (k, v) in env {
            cmd.env(k, v);
        }
        let mut child = cmd
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn server");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let url = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_string();
        Server { child, url }
    }

    /// Hard kill without any shutdown handling.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(60))
        .build()
        .unwrap()
}
