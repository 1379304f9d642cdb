//! Standalone plotting scripts for result CSVs. Nothing is rendered here.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chaos::read_table;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    TailOverlay,
    PhaseDiagram,
    MomentGrowth,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::TailOverlay => "tail_overlay",
            PlotKind::PhaseDiagram => "phase_diagram",
            PlotKind::MomentGrowth => "moment_growth",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        [
            PlotKind::TailOverlay,
            PlotKind::PhaseDiagram,
            PlotKind::MomentGrowth,
        ]
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| Error::Config(format!("unknown plot kind `{name}`")))
    }

    pub fn required_columns(self) -> &'static [&'static str] {
        match self {
            PlotKind::TailOverlay => &["threshold", "estimate", "bound"],
            PlotKind::PhaseDiagram => &["m", "s", "successes", "trials"],
            PlotKind::MomentGrowth => &["p", "estimate"],
        }
    }

    fn body(self) -> &'static str {
        match self {
            PlotKind::TailOverlay => TAIL_OVERLAY,
            PlotKind::PhaseDiagram => PHASE_DIAGRAM,
            PlotKind::MomentGrowth => MOMENT_GROWTH,
        }
    }
}

const PRELUDE: &str = r#"#!/usr/bin/env python3
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV_PATH = {csv}
OUT_PATH = {out}


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {key: [row[key] for row in rows] for key in rows[0]} if rows else {}


def floats(values):
    return [float(v) if v != "" else float("nan") for v in values]


data = load(sys.argv[1] if len(sys.argv) > 1 else CSV_PATH)
fig, ax = plt.subplots(figsize=(6, 4))
"#;

const TAIL_OVERLAY: &str = r#"t = floats(data["threshold"])
est = floats(data["estimate"])
bound = floats(data["bound"])
ax.step(t, est, where="post", label="empirical")
if "ci_low" in data and "ci_high" in data:
    ax.fill_between(t, floats(data["ci_low"]), floats(data["ci_high"]), step="post", alpha=0.3)
ax.plot(t, bound, "--", label="bound")
ax.set_yscale("log")
ax.set_xlabel("threshold")
ax.set_ylabel("survival")
ax.legend()
"#;

const PHASE_DIAGRAM: &str = r#"m = [int(v) for v in data["m"]]
s = [int(v) for v in data["s"]]
rate = [int(a) / int(b) for a, b in zip(data["successes"], data["trials"])]
ms = sorted(set(m))
ss = sorted(set(s))
grid = [[float("nan")] * len(ms) for _ in ss]
for mi, si, r in zip(m, s, rate):
    grid[ss.index(si)][ms.index(mi)] = r
im = ax.imshow(grid, origin="lower", aspect="auto", vmin=0.0, vmax=1.0, cmap="viridis")
ax.set_xticks(range(len(ms)), [str(v) for v in ms])
ax.set_yticks(range(len(ss)), [str(v) for v in ss])
ax.set_xlabel("m")
ax.set_ylabel("s")
fig.colorbar(im, ax=ax, label="success rate")
"#;

const MOMENT_GROWTH: &str = r#"p = floats(data["p"])
est = floats(data["estimate"])
ax.plot(p, est, "o-", label="empirical")
if "ci_low" in data and "ci_high" in data:
    ax.fill_between(p, floats(data["ci_low"]), floats(data["ci_high"]), alpha=0.3)
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel("p")
ax.set_ylabel("L_p norm")
ax.legend()
"#;

const EPILOGUE: &str = r#"fig.tight_layout()
fig.savefig(OUT_PATH, dpi=150)
"#;

fn py_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Write `<csv stem>.<kind>.py` next to the CSV after checking that the
/// columns the figure needs are present.
pub fn emit_plot_script(csv_path: &Path, kind: PlotKind) -> Result<PathBuf> {
    let file = fs::File::open(csv_path)?;
    let table = read_table(BufReader::new(file))?;
    if let Some(col) = kind.required_columns().iter().find(|c| !table.has(c)) {
        return Err(Error::MissingColumn {
            column: (*col).to_string(),
            path: csv_path.to_path_buf(),
        });
    }
    let stem = csv_path.with_extension("");
    let script = PathBuf::from(format!("{}.{}.py", stem.display(), kind.name()));
    let png = PathBuf::from(format!("{}.{}.png", stem.display(), kind.name()));
    let csv_name = csv_path.to_string_lossy();
    let png_name = png.to_string_lossy();
    let text = PRELUDE
        .replace("{csv}", &py_string(&csv_name))
        .replace("{out}", &py_string(&png_name))
        + kind.body()
        + EPILOGUE;
    fs::write(&script, text)?;
    Ok(script)
}
