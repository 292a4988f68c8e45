//! JSON emission with every float written to 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::Result;
use crate::martingale::ProcessSummary;
use crate::types::SettingsProfile;

/// Compact JSON formatter printing floats as `d.dddddddddddddddde±x`.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sig17Formatter;

impl Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Sig17Formatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Analysis report as written by `bellstat analyze`.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport<'a, C: Serialize> {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "m_M")]
    pub m_last: u64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub r: f64,
    pub s: u64,
    pub c: f64,
    pub p_value: f64,
    pub f: f64,
    pub mode: &'static str,
    pub increment: &'static str,
    #[serde(rename = "epsA")]
    pub eps_a: f64,
    #[serde(rename = "epsB")]
    pub eps_b: f64,
    pub qf: f64,
    pub p_ij: [[f64; 2]; 2],
    pub empirical_p_ij: [[f64; 2]; 2],
    pub j_estimate: Option<f64>,
    pub config: &'a C,
}

impl<'a, C: Serialize> AnalysisReport<'a, C> {
    pub fn new(summary: &ProcessSummary, profile: &SettingsProfile, config: &'a C) -> Self {
        AnalysisReport {
            n: summary.n,
            m: summary.m,
            m_last: summary.m_last,
            z: summary.z,
            r: summary.r,
            s: summary.s,
            c: summary.c,
            p_value: summary.p_value,
            f: summary.f,
            mode: profile.mode.as_str(),
            increment: summary.kind.name(),
            eps_a: profile.eps_a,
            eps_b: profile.eps_b,
            qf: profile.qf,
            p_ij: summary.p_ij,
            empirical_p_ij: summary.empirical_p_ij,
            j_estimate: summary.j_estimate,
            config,
        }
    }
}
