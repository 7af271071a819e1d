//! On-disk formats.
//!
//! - Dataset: CSV with header `label,f0,..` plus a JSON manifest of half-open
//!   row ranges `{"public": [a, b], "private": [c, d], "forget": [e, f]}`;
//!   the forget range lies inside the private range.
//! - Model sample set: one `#alu-samples <json>` metadata line followed by a
//!   CSV with header `w0,..` and one row per model.
//! - Reports: pretty JSON.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the in-memory values bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bounds::DataPartition;
use crate::model::{Dataset, Label, LabeledExample, LossProfile, ParamVector};
use crate::pngd::{HyperParams, ModelSampleSet, Pipeline};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub public: [usize; 2],
    pub private: [usize; 2],
    pub forget: [usize; 2],
}

impl Manifest {
    /// Layout used by [`write_dataset`]: public, retained private, forget.
    pub fn for_dataset(d: &Dataset) -> Self {
        let (np, nr, nf) = (d.public.len(), d.private_retain.len(), d.forget.len());
        Self {
            public: [0, np],
            private: [np, np + nr + nf],
            forget: [np + nr, np + nr + nf],
        }
    }

    fn validate(&self, rows: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::parse("manifest", m));
        for [a, b] in [self.public, self.private, self.forget] {
            if a > b || b > rows {
                return bad(&format!(
                    "range [{a}, {b}) is not inside the {rows} data rows"
                ));
            }
        }
        let [pa, pb] = self.public;
        let [qa, qb] = self.private;
        if pa < qb && qa < pb {
            return bad("public and private ranges overlap");
        }
        let [fa, fb] = self.forget;
        if fa < fb && (fa < qa || fb > qb) {
            return bad("forget range must lie inside the private range");
        }
        Ok(())
    }
}

fn range(r: [usize; 2]) -> Range<usize> {
    r[0]..r[1]
}

/// Write the dataset CSV and its manifest.
pub fn write_dataset(dataset: &Dataset, csv_path: &Path, manifest_path: &Path) -> Result<()> {
    let d = dataset.dim()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend((0..d).map(|j| format!("f{j}")));
    w.write_record(&header)
        .map_err(|e| Error::parse("dataset csv", e))?;
    let rows = dataset
        .public
        .iter()
        .chain(&dataset.private_retain)
        .chain(&dataset.forget);
    for ex in rows {
        let mut rec = vec![i8::from(ex.label).to_string()];
        rec.extend(ex.features.iter().map(f64::to_string));
        w.write_record(&rec)
            .map_err(|e| Error::parse("dataset csv", e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse("dataset csv", e))?;
    write_bytes(csv_path, &bytes)?;
    write_json(manifest_path, &Manifest::for_dataset(dataset))
}

/// Read a dataset CSV and split it by the manifest.
pub fn read_dataset(csv_path: &Path, manifest_path: &Path) -> Result<Dataset> {
    let manifest: Manifest = read_json(manifest_path)?;
    let file = fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let examples = parse_examples(file)?;
    manifest.validate(examples.len())?;
    let pick = |r: Range<usize>| examples[r].to_vec();
    let [qa, qb] = manifest.private;
    let [fa, fb] = manifest.forget;
    let private_retain = examples[qa..qb]
        .iter()
        .enumerate()
        .filter(|(i, _)| !(fa..fb).contains(&(qa + i)))
        .map(|(_, e)| e.clone())
        .collect();
    let ds = Dataset::new(
        pick(range(manifest.public)),
        private_retain,
        pick(range(manifest.forget)),
    )?;
    ds.dim()?;
    Ok(ds)
}

fn parse_examples<R: Read>(reader: R) -> Result<Vec<LabeledExample>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r
        .headers()
        .map_err(|e| Error::parse("dataset csv", e))?
        .clone();
    if header.get(0) != Some("label") {
        return Err(Error::parse("dataset csv", "first column must be `label`"));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse("dataset csv", e))?;
        let ctx = || format!("dataset csv row {}", line + 1);
        let label: i8 = rec[0].trim().parse().map_err(|e| Error::parse(ctx(), e))?;
        let label = Label::try_from(label).map_err(|e| Error::parse(ctx(), e))?;
        let features = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::parse(ctx(), e)))
            .collect::<Result<Vec<_>>>()?;
        out.push(LabeledExample::new(features, label).map_err(|e| Error::parse(ctx(), e))?);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct SampleHeader {
    pipeline: Pipeline,
    hyper: HyperParams,
    profile: LossProfile,
    partition: DataPartition,
    seeds: Vec<u64>,
    init_seed: Option<u64>,
    dim: usize,
}

const SAMPLE_TAG: &str = "#alu-samples ";

pub fn write_samples(set: &ModelSampleSet, path: &Path) -> Result<()> {
    let header = SampleHeader {
        pipeline: set.pipeline,
        hyper: set.hyper,
        profile: set.profile,
        partition: set.partition,
        seeds: set.seeds.clone(),
        init_seed: set.init_seed,
        dim: set.dim(),
    };
    let mut out = Vec::new();
    out.extend_from_slice(SAMPLE_TAG.as_bytes());
    serde_json::to_writer(&mut out, &header).map_err(|e| Error::parse("sample header", e))?;
    out.push(b'\n');
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..header.dim).map(|j| format!("w{j}")))
        .map_err(|e| Error::parse("sample csv", e))?;
    for s in &set.samples {
        w.write_record(s.weights.iter().map(f64::to_string))
            .map_err(|e| Error::parse("sample csv", e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse("sample csv", e))?;
    write_bytes(path, &bytes)
}

pub fn read_samples(path: &Path) -> Result<ModelSampleSet> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let json = first
        .trim_end()
        .strip_prefix(SAMPLE_TAG.trim_end())
        .ok_or_else(|| Error::parse("sample file", "missing `#alu-samples` metadata line"))?;
    let header: SampleHeader =
        serde_json::from_str(json).map_err(|e| Error::parse("sample header", e))?;

    let mut r = csv::Reader::from_reader(reader);
    let cols = r
        .headers()
        .map_err(|e| Error::parse("sample csv", e))?
        .len();
    if cols != header.dim {
        return Err(Error::Dimension {
            expected: header.dim,
            found: cols,
        });
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse("sample csv", e))?;
        let ctx = || format!("sample row {}", line + 1);
        let weights = rec
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::parse(ctx(), e)))
            .collect::<Result<Vec<_>>>()?;
        samples.push(
            ParamVector::new(weights, header.hyper.radius).map_err(|e| Error::parse(ctx(), e))?,
        );
    }
    if samples.len() != header.seeds.len() {
        return Err(Error::parse(
            "sample file",
            format!("{} rows for {} seeds", samples.len(), header.seeds.len()),
        ));
    }
    Ok(ModelSampleSet {
        pipeline: header.pipeline,
        hyper: header.hyper,
        profile: header.profile,
        partition: header.partition,
        seeds: header.seeds,
        init_seed: header.init_seed,
        samples,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::parse("json", e))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json_string(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
