//! Point-cloud CSV files and the on-disk dataset layout.
//!
//! A cloud file has the header `x,y,z,f0,...,f{C-1}[,label]` and one row per
//! point. A dataset root holds `<split>/<class>/<id>.csv` plus `manifest.txt`,
//! whose lines read `<relative path> <label>`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use assa_core::geometry::PointCloud;
use assa_core::tensor::Matrix;

pub const MANIFEST: &str = "manifest.txt";

pub fn write_cloud<W: Write>(out: W, cloud: &PointCloud<f32>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let c = cloud.channels();
    let mut header: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    header.extend((0..c).map(|i| format!("f{i}")));
    if cloud.label.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, p) in cloud.positions().iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        row.extend(cloud.features().row(i).iter().map(|v| v.to_string()));
        if let Some(l) = cloud.label {
            row.push(l.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cloud. A file without feature columns gets its coordinates as features.
pub fn read_cloud<R: Read>(input: R) -> Result<PointCloud<f32>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < 3 || names[..3] != ["x", "y", "z"] {
        bail!("header must start with x,y,z, got {:?}", names);
    }
    let has_label = names.last() == Some(&"label");
    let c = names.len() - 3 - has_label as usize;
    for (i, n) in names[3..3 + c].iter().enumerate() {
        if *n != format!("f{i}") {
            bail!("expected column f{i}, got {n}");
        }
    }
    let mut positions = Vec::new();
    let mut feats = Vec::new();
    let mut label = None;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: Vec<&str> = rec.iter().map(str::trim).collect();
        let num = |i: usize| -> Result<f32> {
            vals[i].parse().with_context(|| format!("row {}: bad number {:?}", line + 1, vals[i]))
        };
        positions.push([num(0)?, num(1)?, num(2)?]);
        for i in 0..c {
            feats.push(num(3 + i)?);
        }
        if has_label {
            let l: usize = vals[3 + c].parse().with_context(|| format!("row {}: bad label", line + 1))?;
            match label {
                None => label = Some(l),
                Some(prev) if prev != l => bail!("row {}: label {l} differs from {prev}", line + 1),
                _ => {}
            }
        }
    }
    let cloud = if c == 0 {
        PointCloud::from_positions(positions, label)?
    } else {
        let n = positions.len();
        PointCloud::new(positions, Matrix::new(n, c, feats)?, label)?
    };
    Ok(cloud)
}

pub fn save_cloud(path: &Path, cloud: &PointCloud<f32>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_cloud(std::io::BufWriter::new(f), cloud)
}

pub fn load_cloud(path: &Path) -> Result<PointCloud<f32>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_cloud(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

/// Writes both splits and the manifest. `classes[label]` names the class directory.
pub fn write_dataset(root: &Path, classes: &[&str], train: &[PointCloud<f32>], test: &[PointCloud<f32>]) -> Result<()> {
    fs::create_dir_all(root)?;
    let mut manifest = String::new();
    for (split, clouds) in [("train", train), ("test", test)] {
        for (id, c) in clouds.iter().enumerate() {
            let label = c.label.ok_or_else(|| anyhow!("{split} cloud {id} has no label"))?;
            let class = classes.get(label).ok_or_else(|| anyhow!("label {label} has no class name"))?;
            let rel = format!("{split}/{class}/{id:05}.csv");
            save_cloud(&root.join(&rel), c)?;
            manifest.push_str(&format!("{rel} {label}\n"));
        }
    }
    fs::write(root.join(MANIFEST), manifest)?;
    Ok(())
}

/// Loads every manifest entry of `split`, in manifest order.
pub fn read_split(root: &Path, split: &str) -> Result<Vec<PointCloud<f32>>> {
    let path = root.join(MANIFEST);
    let f = fs::File::open(&path).with_context(|| format!("no dataset at {}", root.display()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (rel, label) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| anyhow!("{}:{}: expected `<path> <label>`", path.display(), n + 1))?;
        if rel.split('/').next() != Some(split) {
            continue;
        }
        let label: usize = label.parse().with_context(|| format!("{}:{}: bad label", path.display(), n + 1))?;
        let mut cloud = load_cloud(&root.join(rel.trim()))?;
        if cloud.label.is_some_and(|l| l != label) {
            bail!("{rel}: file label differs from manifest label {label}");
        }
        cloud.label = Some(label);
        out.push(cloud);
    }
    if out.is_empty() {
        bail!("split {split:?} is empty in {}", path.display());
    }
    Ok(out)
}
