//! Synthetic datasets and CLI helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use caenet::data::{encode_ppm, from_tensor, Rng};
use caenet::Tensor;

/// Smooth two-dimensional sinusoids on a per-channel base colour.
pub fn smooth_images(n: usize, size: usize, seed: u64) -> Vec<Tensor> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|_| {
            let (fx, fy) = (rng.uniform(0.25, 1.5), rng.uniform(0.25, 1.5));
            let mut v = vec![0.0; 3 * size * size];
            for c in 0..3 {
                let (ph, amp, base) = (rng.uniform(0.0, TAU), rng.uniform(0.05, 0.15), rng.uniform(0.15, 0.85));
                for y in 0..size {
                    for x in 0..size {
                        let (u, w) = (x as f64 / size as f64, y as f64 / size as f64);
                        v[c * size * size + y * size + x] =
                            base + amp * (TAU * fx * u + ph).sin() * (TAU * fy * w).cos();
                    }
                }
            }
            Tensor::from_vec(&[3, size, size], v).unwrap()
        })
        .collect()
}

/// Three classes of stripes: horizontal, vertical, and diagonal. Sample `i`
/// has label `i % 3`.
pub fn striped_images(n: usize, size: usize, seed: u64) -> Vec<(Tensor, usize)> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|i| {
            let label = i % 3;
            let f = rng.uniform(2.0, 4.0);
            let ph = rng.uniform(0.0, TAU);
            let mut v = vec![0.0; 3 * size * size];
            for c in 0..3 {
                let base = rng.uniform(0.3, 0.7);
                for y in 0..size {
                    for x in 0..size {
                        let (u, w) = (x as f64 / size as f64, y as f64 / size as f64);
                        let t = match label {
                            0 => u,
                            1 => w,
                            _ => (u + w) / 2.0,
                        };
                        let s = base + 0.25 * (TAU * f * t + ph).sin() + rng.uniform(-0.05, 0.05);
                        v[c * size * size + y * size + x] = s.clamp(0.0, 1.0);
                    }
                }
            }
            (Tensor::from_vec(&[3, size, size], v).unwrap(), label)
        })
        .collect()
}

/// Writes each image as PPM under `dir/images` plus `dir/<name>` listing
/// them with labels `class{label}`.
pub fn write_dataset(dir: &Path, name: &str, images: &[(Tensor, usize)]) -> PathBuf {
    let img_dir = dir.join("images");
    std::fs::create_dir_all(&img_dir).unwrap();
    let mut csv = String::from("path,label\n");
    for (i, (t, label)) in images.iter().enumerate() {
        let rel = format!("images/{name}-{i:03}.ppm");
        std::fs::write(dir.join(&rel), encode_ppm(&from_tensor(t).unwrap())).unwrap();
        csv.push_str(&format!("{rel},class{label}\n"));
    }
    let path = dir.join(name);
    std::fs::write(&path, csv).unwrap();
    path
}

pub fn write_config(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, json).unwrap();
    path
}

pub fn caenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caenet"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
