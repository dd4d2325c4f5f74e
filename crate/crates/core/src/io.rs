//! File formats: series CSV, model and report JSON, spectrum and draw CSVs.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::ar::ArModel;
use crate::error::{Error, Result};
use crate::estimators::PosteriorSamples;
use crate::likelihood::{round_to_grid, CollisionMode, SampledSeries};

/// Layout of a series CSV, decided by its header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesLayout {
    /// `index,value` with integer grid indices.
    Gridded,
    /// `time,value` with continuous times.
    Raw,
}

/// Options for [`read_series`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    /// Grid spacing for raw times.
    pub t_g: f64,
    pub collide: CollisionMode,
    /// Subtract the sample mean. `None` demeans raw input only.
    pub demean: Option<bool>,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions { t_g: 1.0, collide: CollisionMode::Error, demean: None }
    }
}

fn parse_field(field: &str, line: u64, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("line {line}: cannot parse {what} '{field}'")))
}

/// Reads a gridded (`index,value`) or raw (`time,value`) series.
pub fn read_series<R: Read>(reader: R, opts: &SeriesOptions) -> Result<(SampledSeries, SeriesLayout)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    let layout = match names.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["index", "value"] => SeriesLayout::Gridded,
        ["time", "value"] => SeriesLayout::Raw,
        _ => {
            return Err(Error::InvalidInput(format!(
                "expected header 'index,value' or 'time,value', got '{}'",
                names.join(",")
            )))
        }
    };
    let mut keys = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        keys.push(parse_field(&rec[0], line, "index or time")?);
        values.push(parse_field(&rec[1], line, "value")?);
    }
    let series = match layout {
        SeriesLayout::Raw => round_to_grid(&keys, &values, opts.t_g, opts.collide)?,
        SeriesLayout::Gridded => gridded(&keys, values)?,
    };
    let demean = opts.demean.unwrap_or(layout == SeriesLayout::Raw);
    Ok((if demean { series.demeaned() } else { series }, layout))
}

fn gridded(keys: &[f64], values: Vec<f64>) -> Result<SampledSeries> {
    let mut pairs = Vec::with_capacity(keys.len());
    for (&k, v) in keys.iter().zip(values) {
        if !(k >= 0.0 && k.fract() == 0.0 && k < 1e15) {
            return Err(Error::InvalidInput(format!("index {k} is not a non-negative integer")));
        }
        pairs.push((k as usize, v));
    }
    pairs.sort_by_key(|p| p.0);
    if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidInput(format!("index {} appears twice", w[0].0)));
    }
    let n_grid = pairs.last().map_or(0, |p| p.0 + 1);
    let (indices, values) = pairs.into_iter().unzip();
    SampledSeries::new(1.0, n_grid, indices, values)
}

/// `index,value` rows of a series.
pub fn write_series<W: Write>(w: W, series: &SampledSeries) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "value"])?;
    for (i, v) in series.iter() {
        out.write_record([i.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(reader: R) -> Result<ArModel> {
    serde_json::from_reader(reader).map_err(|e| Error::InvalidInput(format!("model JSON: {e}")))
}

pub fn write_model<W: Write>(mut w: W, model: &ArModel) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, model).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

/// `freq,psd` rows.
pub fn write_spectrum<W: Write>(w: W, freqs: &[f64], psd: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["freq", "psd"])?;
    for (f, h) in freqs.iter().zip(psd) {
        out.write_record([f.to_string(), h.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `nfreq` equally spaced frequencies covering `[0, 0.5]`.
pub fn frequency_grid(nfreq: usize) -> Vec<f64> {
    match nfreq {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|k| 0.5 * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub accept_rate: Option<f64>,
    pub step_size: Option<f64>,
    pub divergences: Option<usize>,
    pub start_used: Option<String>,
}

/// Summary of one estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub model: ArModel,
    pub loglik: f64,
    pub method: String,
    pub diagnostics: Diagnostics,
}

pub fn write_report<W: Write>(mut w: W, report: &EstimationReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, report).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

/// One row per draw: `phi_1..phi_p,sigma2`.
pub fn write_draws<W: Write>(w: W, samples: &PosteriorSamples) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=samples.p).map(|i| format!("phi_{i}")).collect();
    header.push("sigma2".into());
    out.write_record(&header)?;
    for row in samples.rows() {
        out.write_record(row.iter().map(f64::to_string))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, opts: SeriesOptions) -> Result<SampledSeries> {
        read_series(text.as_bytes(), &opts).map(|(s, _)| s)
    }

    #[test]
    fn gridded_input_sorted_and_kept() {
        let s = read("index,value\n3,1.5\n0,-1\n1,2\n", SeriesOptions::default()).unwrap();
        assert_eq!(s.indices(), &[0, 1, 3]);
        assert_eq!(s.values(), &[-1.0, 2.0, 1.5]);
        assert_eq!(s.n_grid(), 4);
        assert!(read("index,value\n1,1\n1,2\n", SeriesOptions::default()).is_err());
        assert!(read("index,value\n1.5,1\n", SeriesOptions::default()).is_err());
    }

    #[test]
    fn raw_input_is_rounded_and_demeaned() {
        let s = read("time,value\n0.0,1\n1.6,2\n3.1,3\n", SeriesOptions::default()).unwrap();
        assert_eq!(s.indices(), &[0, 2, 3]);
        assert_eq!(s.values(), &[-1.0, 0.0, 1.0]);
        let opts = SeriesOptions { demean: Some(false), ..Default::default() };
        assert_eq!(read("time,value\n0,1\n2,2\n", opts).unwrap().values(), &[1.0, 2.0]);
    }

    #[test]
    fn collisions() {
        let err = read("time,value\n0.0,1\n0.4,3\n", SeriesOptions::default()).unwrap_err();
        assert!(matches!(err, Error::GridCollision { .. }));
        let opts = SeriesOptions { collide: CollisionMode::Mean, demean: Some(false), ..Default::default() };
        let s = read("time,value\n0.0,1\n0.4,3\n", opts).unwrap();
        assert_eq!((s.indices(), s.values()), (&[0usize][..], &[2.0][..]));
    }

    #[test]
    fn bad_headers_and_values() {
        assert!(read("t,y\n0,1\n", SeriesOptions::default()).unwrap_err().is_input_error());
        assert!(read("index,value\n0,abc\n", SeriesOptions::default()).unwrap_err().is_input_error());
        assert!(read("index,value\n0\n", SeriesOptions::default()).unwrap_err().is_input_error());
    }

    #[test]
    fn model_round_trip() {
        let m = ArModel::new(vec![0.5, -0.25], 2.0);
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"p\": 2"));
        assert_eq!(read_model(buf.as_slice()).unwrap(), m);
        assert!(read_model(r#"{"p":3,"a":[0.1],"sigma_v2":1}"#.as_bytes()).is_err());
        assert!(read_model(r#"{"p":0,"a":[],"sigma_v2":-1}"#.as_bytes()).is_err());
    }

    #[test]
    fn series_round_trip() {
        let s = SampledSeries::new(1.0, 10, vec![2, 5, 9], vec![0.25, -1.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        write_series(&mut buf, &s).unwrap();
        let back = read(std::str::from_utf8(&buf).unwrap(), SeriesOptions::default()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn frequencies_span_half_band() {
        assert_eq!(frequency_grid(4), vec![0.0, 0.5 / 3.0, 1.0 / 3.0, 0.5]);
        assert_eq!(frequency_grid(512).last(), Some(&0.5));
    }

    #[test]
    fn draws_layout() {
        let samples = PosteriorSamples {
            p: 2,
            phi: vec![vec![0.1, 0.2], vec![0.3, 0.4]],
            sigma2: vec![1.0, 2.0],
            accept_rate: 0.8,
            step_size: 0.1,
            divergences: 0,
            inv_metric: vec![1.0; 3],
        };
        let mut buf = Vec::new();
        write_draws(&mut buf, &samples).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "phi_1,phi_2,sigma2\n0.1,0.2,1\n0.3,0.4,2\n");
    }
}
