use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use crate::{Result, TrainError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportMode {
    Autoencode,
    Translate,
}

impl ReportMode {
    pub fn tag(self) -> &'static str {
        match self {
            ReportMode::Autoencode => "A",
            ReportMode::Translate => "T",
        }
    }
}

/// Per-iteration loss scalars for one branch. Unused terms of the other
/// branch are zero. Assembly identities:
///   total_t = adv + gamma_sty*sty - gamma_ds_eff*ds + gamma_cyc*cyc
///             + lambda_t*rate_bpp
///   total_a = rd_distortion + lambda_a*rate_bpp + beta*adv2
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub iteration: u64,
    pub mode: ReportMode,
    pub adv: f64,
    pub sty: f64,
    pub ds: f64,
    pub cyc: f64,
    /// Eq.-5 rate estimate in bits per pixel (content + hyper latents).
    pub rate_bpp: f64,
    pub rd_distortion: f64,
    pub adv2: f64,
    /// Discriminator-side adversarial loss of this branch's update.
    pub d_adv: f64,
    /// Effective (annealed) diversity weight used this iteration.
    pub gamma_ds_eff: f64,
    pub total_t: f64,
    pub total_a: f64,
}

pub const CSV_HEADER: &str =
    "iteration,mode,adv,sty,ds,cyc,rate_bpp,rd_distortion,adv2,d_adv,gamma_ds_eff,total_t,total_a";

impl LossReport {
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.mode.tag(),
            self.adv,
            self.sty,
            self.ds,
            self.cyc,
            self.rate_bpp,
            self.rd_distortion,
            self.adv2,
            self.d_adv,
            self.gamma_ds_eff,
            self.total_t,
            self.total_a
        )
        .expect("write to string");
        s
    }

    pub fn parse_csv_row(row: &str) -> Result<Self> {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 13 {
            return Err(TrainError::Config(format!(
                "loss csv row has {} fields, expected 13",
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| TrainError::Config(format!("bad csv number '{}': {e}", fields[i])))
        };
        Ok(LossReport {
            iteration: fields[0]
                .parse()
                .map_err(|e| TrainError::Config(format!("bad iteration: {e}")))?,
            mode: match fields[1] {
                "A" => ReportMode::Autoencode,
                "T" => ReportMode::Translate,
                other => return Err(TrainError::Config(format!("bad mode tag '{other}'"))),
            },
            adv: num(2)?,
            sty: num(3)?,
            ds: num(4)?,
            cyc: num(5)?,
            rate_bpp: num(6)?,
            rd_distortion: num(7)?,
            adv2: num(8)?,
            d_adv: num(9)?,
            gamma_ds_eff: num(10)?,
            total_t: num(11)?,
            total_a: num(12)?,
        })
    }
}

/// Append-only loss log.
pub struct LossCsv {
    file: std::fs::File,
}

impl LossCsv {
    /// Open for appending, writing the header only when the file is new.
    pub fn open(path: &Path) -> Result<Self> {
        let new = !path.exists();
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if new {
            writeln!(file, "{CSV_HEADER}")?;
        }
        Ok(LossCsv { file })
    }

    pub fn append(&mut self, report: &LossReport) -> Result<()> {
        writeln!(self.file, "{}", report.csv_row())?;
        Ok(())
    }

    pub fn read_all(path: &Path) -> Result<Vec<LossReport>> {
        let text = std::fs::read_to_string(path)?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line != CSV_HEADER {
                    return Err(TrainError::Config("unexpected loss csv header".into()));
                }
                continue;
            }
            if !line.trim().is_empty() {
                out.push(LossReport::parse_csv_row(line)?);
            }
        }
        Ok(out)
    }
}
