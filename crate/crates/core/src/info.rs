//! V-entropies, V-information and the V-coefficient, all in bits per
//! sentence.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::Example;
use crate::error::{Error, Result};
use crate::heads::{csv_err, write_manifest_line};
use crate::manifest::RunManifest;
use crate::probes::{ProbeFamily, ProbeKind, ProbeParams};
use crate::train::{hyper_search_biaffine, mean_loss_bits, train, BiaffineTrial, TrainConfig};

/// Mean held-out loss of a probe that reads the representations.
pub fn conditional_v_entropy(params: &ProbeParams<f64>, test: &[Example<f64>]) -> Result<f64> {
    mean_loss_bits(params, test)
}

/// Mean held-out loss of a content-free (positional) probe.
pub fn unconditional_v_entropy(params: &ProbeParams<f64>, test: &[Example<f64>]) -> Result<f64> {
    if !params.kind().positional {
        return Err(Error::Config(format!(
            "unconditional entropy needs a positional probe, got {}",
            params.kind()
        )));
    }
    mean_loss_bits(params, test)
}

/// `h_uncond − h_cond`, unclamped.
pub fn v_information(h_uncond: f64, h_cond: f64) -> f64 {
    h_uncond - h_cond
}

/// Share of the estimated mutual information that a family extracts.
pub fn v_coefficient(i_v: f64, mi: f64) -> Result<f64> {
    if !(mi > 0.0) {
        return Err(Error::DivisionDomain(format!("mutual information estimate {mi} is not positive")));
    }
    Ok(i_v / mi)
}

/// One row of the information report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoReport {
    pub layer: usize,
    pub family: ProbeFamily,
    #[serde(rename = "h_uncond")]
    pub h_v_uncond: f64,
    #[serde(rename = "h_cond")]
    pub h_v_cond: f64,
    pub i_v: f64,
    #[serde(rename = "mi")]
    pub mi_estimate: Option<f64>,
    pub c_v: Option<f64>,
}

impl InfoReport {
    pub fn new(layer: usize, family: ProbeFamily, h_uncond: f64, h_cond: f64, mi: Option<f64>) -> Result<Self> {
        let i_v = v_information(h_uncond, h_cond);
        let c_v = mi.map(|m| v_coefficient(i_v, m)).transpose()?;
        let report = InfoReport { layer, family, h_v_uncond: h_uncond, h_v_cond: h_cond, i_v, mi_estimate: mi, c_v };
        if report.negative() {
            log::warn!("negative V-information {i_v:.4} bits for {family} at layer {layer}");
        }
        Ok(report)
    }

    /// Estimation failure: the content-free probe beat the contextual one.
    pub fn negative(&self) -> bool {
        self.i_v < 0.0
    }

    /// Same report with the MI estimate replaced.
    pub fn with_mi(&self, mi: f64) -> Result<Self> {
        Ok(InfoReport { mi_estimate: Some(mi), c_v: Some(v_coefficient(self.i_v, mi)?), ..self.clone() })
    }
}

/// Measurable parts of the estimation error. The approximation error of the
/// family and the optimisation gap have no estimator and are not reported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorProxies {
    pub test_bits: f64,
    pub dev_bits: f64,
    /// `test − dev`; near zero when the test set is large enough.
    pub dev_test_gap: f64,
}

pub fn error_proxies(params: &ProbeParams<f64>, dev: &[Example<f64>], test: &[Example<f64>]) -> Result<ErrorProxies> {
    let test_bits = mean_loss_bits(params, test)?;
    let dev_bits = mean_loss_bits(params, dev)?;
    Ok(ErrorProxies { test_bits, dev_bits, dev_test_gap: test_bits - dev_bits })
}

/// Trained contextual and positional probes of one family, with their
/// test entropies.
#[derive(Clone, Debug)]
pub struct FamilyEstimate {
    pub contextual: ProbeParams<f64>,
    pub positional: ProbeParams<f64>,
    pub h_cond: f64,
    pub h_uncond: f64,
}

impl FamilyEstimate {
    pub fn i_v(&self) -> f64 {
        v_information(self.h_uncond, self.h_cond)
    }
}

/// `config` with the positional table long enough for every split.
fn covering(config: &TrainConfig, splits: &[&[Example<f64>]]) -> TrainConfig {
    let longest = splits.iter().flat_map(|s| s.iter()).map(Example::n).max().unwrap_or(0);
    TrainConfig { max_len: config.max_len.max(longest), ..config.clone() }
}

/// Trains the contextual probe of `family` and, unless one is supplied, its
/// positional counterpart; then evaluates both on `test`. The positional
/// probe ignores the representations, so one can serve every layer.
pub fn estimate_family(
    family: ProbeFamily,
    train_set: &[Example<f64>],
    dev: &[Example<f64>],
    test: &[Example<f64>],
    config: &TrainConfig,
    positional: Option<ProbeParams<f64>>,
) -> Result<FamilyEstimate> {
    let contextual = train(ProbeKind::contextual(family), train_set, dev, config)?.params;
    let positional = match positional {
        Some(p) => p,
        None => train(ProbeKind::positional(family), train_set, dev, &covering(config, &[train_set, dev, test]))?.params,
    };
    Ok(FamilyEstimate {
        h_cond: conditional_v_entropy(&contextual, test)?,
        h_uncond: unconditional_v_entropy(&positional, test)?,
        contextual,
        positional,
    })
}

/// Mutual information estimate from the best hyper-searched biaffine probe.
#[derive(Clone, Debug)]
pub struct Skyline {
    pub mi_bits: f64,
    pub best: BiaffineTrial,
    pub best_config: TrainConfig,
    pub estimate: FamilyEstimate,
}

pub fn mi_skyline(
    train_set: &[Example<f64>],
    dev: &[Example<f64>],
    test: &[Example<f64>],
    n_trials: usize,
    base: &TrainConfig,
) -> Result<Skyline> {
    let search = hyper_search_biaffine(train_set, dev, n_trials, base)?;
    let config = covering(&search.best_config, &[train_set, dev, test]);
    let positional = train(ProbeKind::positional(ProbeFamily::Biaffine), train_set, dev, &config)?.params;
    let estimate = FamilyEstimate {
        h_cond: conditional_v_entropy(&search.outcome.params, test)?,
        h_uncond: unconditional_v_entropy(&positional, test)?,
        contextual: search.outcome.params,
        positional,
    };
    Ok(Skyline { mi_bits: estimate.i_v(), best: search.best, best_config: search.best_config, estimate })
}

/// The single MI estimate reused across layers: the largest skyline.
pub fn best_skyline(values: &[f64]) -> Option<f64> {
    values.iter().copied().filter(|v| v.is_finite()).reduce(f64::max)
}

/// CSV with columns `layer,family,h_uncond,h_cond,i_v,mi,c_v`, optionally
/// preceded by a `#` line holding the run manifest.
pub fn write_report_csv<W: Write>(mut w: W, reports: &[InfoReport], manifest: Option<&RunManifest>) -> Result<()> {
    write_manifest_line(&mut w, manifest)?;
    let mut wr = csv::Writer::from_writer(w);
    for r in reports {
        wr.serialize(r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_report_csv<R: Read>(r: R) -> Result<Vec<InfoReport>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut out = Vec::new();
    for (k, row) in rd.deserialize().enumerate() {
        let row: InfoReport = row.map_err(|e| Error::Parse { line: k + 2, msg: e.to_string() })?;
        out.push(row);
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus("report has no rows".into()));
    }
    Ok(out)
}

/// One model's summary: its best layer by V-information.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub layer: usize,
    pub i_v: f64,
    pub mi: Option<f64>,
    pub c_v: Option<f64>,
}

/// The layer of `family` with the largest V-information.
pub fn table_row(model: &str, reports: &[InfoReport], family: ProbeFamily) -> Option<TableRow> {
    reports
        .iter()
        .filter(|r| r.family == family)
        .max_by(|a, b| a.i_v.total_cmp(&b.i_v).then(b.layer.cmp(&a.layer)))
        .map(|r| TableRow { model: model.to_string(), layer: r.layer, i_v: r.i_v, mi: r.mi_estimate, c_v: r.c_v })
}

/// Whole-percent rendering of a V-coefficient.
pub fn percent(c_v: f64) -> String {
    format!("{:.0}%", c_v * 100.0)
}

/// Plain-text table with columns `Model, Layer, I_V, I, C_V`.
pub fn format_table(rows: &[TableRow]) -> String {
    let header = ["Model", "Layer", "I_V", "I", "C_V"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            let flag = if r.i_v < 0.0 { " (neg)" } else { "" };
            [
                r.model.clone(),
                r.layer.to_string(),
                format!("{:.1}{flag}", r.i_v),
                r.mi.map_or("-".into(), |m| format!("{m:.1}")),
                r.c_v.map_or("-".into(), percent),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&header.map(String::from));
    for row in &body {
        out.push_str(&line(row));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        assert!((v_information(31.2, 3.2) - 28.0).abs() < 1e-12);
        assert_eq!(v_information(4.0, 4.0), 0.0);
        let r = InfoReport::new(7, ProbeFamily::Attentional, 5.0, 6.0, None).unwrap();
        assert_eq!(r.i_v, -1.0);
        assert!(r.negative());
        assert_eq!(percent(v_coefficient(28.0, 31.2).unwrap()), "90%");
        assert_eq!(percent(v_coefficient(25.5, 31.2).unwrap()), "82%");
        assert_eq!(percent(v_coefficient(27.7, 31.2).unwrap()), "89%");
        assert_eq!(v_coefficient(0.0, 3.0).unwrap(), 0.0);
        assert!(matches!(v_coefficient(1.0, 0.0), Err(Error::DivisionDomain(_))));
        assert!(matches!(v_coefficient(1.0, -2.0), Err(Error::DivisionDomain(_))));
    }

    #[test]
    fn csv_round_trip() {
        let reports = vec![
            InfoReport::new(0, ProbeFamily::Attentional, 10.0, 4.0, Some(8.0)).unwrap(),
            InfoReport::new(1, ProbeFamily::Structural, 10.0, 7.5, None).unwrap(),
        ];
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &reports, None).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("layer,family,h_uncond,h_cond,i_v,mi,c_v\n"));
        assert_eq!(read_report_csv(buf.as_slice()).unwrap(), reports);
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &reports, Some(&RunManifest::new("info", "", 3))).unwrap();
        assert!(buf.starts_with(b"# {"));
        assert_eq!(read_report_csv(buf.as_slice()).unwrap(), reports);
    }

    #[test]
    fn table_layout() {
        let reports = vec![
            InfoReport::new(3, ProbeFamily::Attentional, 31.2, 5.0, Some(31.2)).unwrap(),
            InfoReport::new(7, ProbeFamily::Attentional, 31.2, 3.2, Some(31.2)).unwrap(),
        ];
        let row = table_row("BERT", &reports, ProbeFamily::Attentional).unwrap();
        assert_eq!(row.layer, 7);
        let t = format_table(&[row]);
        let mut lines = t.lines();
        let head: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(head, ["Model", "Layer", "I_V", "I", "C_V"]);
        let cells: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(cells, ["BERT", "7", "28.0", "31.2", "90%"]);
    }
}
