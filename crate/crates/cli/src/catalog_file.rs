//! Event catalogs and raster localization maps on disk.
//!
//! A catalog is comma-delimited text:
//!
//! ```text
//! #nhpp-catalog v1
//! #domain lower=0;-11;0 upper=360;90;5000 weights=1;1;1 wrap_first=true loc_dims=2
//! id:str,ra_deg:f64,dec_deg:f64,dm:f64,dm_sigma:f64,loc:str,cluster:str
//! ev00000,12.5,40.1,503.2,1.4,sigma:0.2,
//! ```
//!
//! Coordinates are in file units (degrees, pc cm^-3). The first `loc_dims`
//! coordinates share the `loc` column: `none`, `sigma:<s>` for an isotropic
//! Gaussian, or `map:<path>` naming a raster relative to the catalog. Every
//! later coordinate has its own `<axis>_sigma` column, where 0 means exact.
//! The `cluster` column is optional and may be empty.
//!
//! A raster holds a displacement density on a regular grid:
//!
//! ```text
//! #nhpp-raster v1
//! lower -0.5 -0.5
//! upper 0.5 0.5
//! shape 20 20
//! <weights, whitespace separated, row-major with the last axis fastest>
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nhpp_core::{CatalogEvent, Domain, EventCatalog, GridDensity, NoiseModel, Point};

use crate::error::{data_err, CliError, CliResult, Context};
use crate::io::{check_header, header_line, join_f64, parse_f64_list, read_text, write_atomic};

pub const CATALOG_VERSION: u32 = 1;
pub const RASTER_VERSION: u32 = 1;

/// Column naming and localization layout of a catalog file.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogLayout {
    pub axes: Vec<String>,
    pub loc_dims: usize,
}

impl CatalogLayout {
    /// `ra_deg, dec_deg, dm` for the 3D sky domain, `x0, x1, ...` otherwise.
    pub fn default_for(domain: &Domain) -> Self {
        let dim = domain.dim();
        let axes = if dim == 3 && domain.wraps_first() {
            vec!["ra_deg".into(), "dec_deg".into(), "dm".into()]
        } else {
            (0..dim).map(|i| format!("x{i}")).collect()
        };
        Self { axes, loc_dims: dim.min(2) }
    }
}

#[derive(Debug, Clone)]
pub struct CatalogFile {
    pub catalog: EventCatalog,
    pub layout: CatalogLayout,
}

fn domain_line(domain: &Domain, loc_dims: usize) -> String {
    format!(
        "#domain lower={} upper={} weights={} wrap_first={} loc_dims={}",
        join_f64(domain.lower(), ";"),
        join_f64(domain.upper(), ";"),
        join_f64(domain.weights(), ";"),
        domain.wraps_first(),
        loc_dims
    )
}

fn parse_domain_line(line: &str, path: &Path) -> CliResult<(Domain, usize)> {
    let bad = |msg: String| data_err(format!("{}: #domain line: {msg}", path.display()));
    let rest = line.strip_prefix("#domain").ok_or_else(|| bad("missing".into()))?;
    let mut fields: HashMap<&str, &str> = HashMap::new();
    for tok in rest.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {tok:?}")))?;
        if fields.insert(k, v).is_some() {
            return Err(bad(format!("duplicate key {k}")));
        }
    }
    let mut take = |k: &str| fields.remove(k).ok_or_else(|| bad(format!("missing {k}")));
    let lower = parse_f64_list(take("lower")?, ';').map_err(bad)?;
    let upper = parse_f64_list(take("upper")?, ';').map_err(bad)?;
    let weights = parse_f64_list(take("weights")?, ';').map_err(bad)?;
    let wrap: bool = take("wrap_first")?.parse().map_err(|e| bad(format!("wrap_first: {e}")))?;
    let loc_dims: usize = take("loc_dims")?.parse().map_err(|e| bad(format!("loc_dims: {e}")))?;
    if let Some(k) = fields.keys().next() {
        return Err(bad(format!("unknown key {k}")));
    }
    let domain = Domain::with_options(lower, upper, weights, wrap).map_err(|e| bad(e.to_string()))?;
    if loc_dims == 0 || loc_dims > domain.dim() {
        return Err(bad(format!("loc_dims must be in 1..={}", domain.dim())));
    }
    Ok((domain, loc_dims))
}

fn unsupported(id: &str, what: &str) -> CliError {
    data_err(format!("event {id:?}: {what} cannot be written to a catalog"))
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes a catalog and the sidecar rasters of any gridded localizations.
pub fn write_catalog(path: &Path, catalog: &EventCatalog, layout: &CatalogLayout) -> CliResult<()> {
    let domain = &catalog.domain;
    let dim = domain.dim();
    if layout.axes.len() != dim || layout.loc_dims == 0 || layout.loc_dims > dim {
        return Err(data_err(format!("catalog layout {layout:?} does not fit a {dim}D domain")));
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let map_dir = format!("{stem}_maps");
    let has_clusters = catalog.events.iter().any(|e| e.cluster.is_some());

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["id:str".to_string()];
    header.extend(layout.axes.iter().map(|a| format!("{a}:f64")));
    header.extend(layout.axes[layout.loc_dims..].iter().map(|a| format!("{a}_sigma:f64")));
    header.push("loc:str".into());
    if has_clusters {
        header.push("cluster:str".into());
    }
    w.write_record(&header).data("catalog")?;

    for e in &catalog.events {
        let (head, tail) = e.noise.split_at(layout.loc_dims).ok_or_else(|| unsupported(&e.id, "this noise model"))?;
        let loc = match &head {
            NoiseModel::Degenerate { .. } => "none".to_string(),
            NoiseModel::Gaussian { sigma } if sigma.iter().all(|s| *s == sigma[0]) => format!("sigma:{}", sigma[0]),
            NoiseModel::Gridded(g) => {
                let rel = format!("{map_dir}/{}.raster", sanitize(&e.id));
                let dir = path.parent().unwrap_or(Path::new(""));
                write_raster(&dir.join(&rel), g)?;
                format!("map:{rel}")
            }
            _ => return Err(unsupported(&e.id, "an anisotropic localization")),
        };
        let mut trailing = Vec::new();
        let singles = match tail {
            None => vec![],
            Some(NoiseModel::Product(parts)) => parts,
            Some(m) => vec![m],
        };
        for m in singles {
            match m {
                NoiseModel::Degenerate { dim } => trailing.extend(std::iter::repeat_n(0.0, dim)),
                NoiseModel::Gaussian { sigma } => trailing.extend(sigma),
                _ => return Err(unsupported(&e.id, "a non-Gaussian trailing error")),
            }
        }
        let mut rec = vec![e.id.clone()];
        rec.extend(e.observed.coords().iter().map(|x| x.to_string()));
        rec.extend(trailing.iter().map(|x| x.to_string()));
        rec.push(loc);
        if has_clusters {
            rec.push(e.cluster.clone().unwrap_or_default());
        }
        w.write_record(&rec).data("catalog")?;
    }
    let body = w.into_inner().map_err(|e| data_err(e.to_string()))?;
    let mut out = format!("{}\n{}\n", header_line("catalog", CATALOG_VERSION), domain_line(domain, layout.loc_dims)).into_bytes();
    out.extend(body);
    write_atomic(path, &out)
}

fn trailing_model(sigmas: &[f64]) -> Option<NoiseModel> {
    if sigmas.is_empty() {
        None
    } else if sigmas.iter().all(|s| *s > 0.0) {
        Some(NoiseModel::Gaussian { sigma: sigmas.to_vec() })
    } else if sigmas.iter().all(|s| *s == 0.0) {
        Some(NoiseModel::Degenerate { dim: sigmas.len() })
    } else {
        Some(NoiseModel::Product(sigmas.iter().map(|&s| trailing_model(&[s]).expect("one sigma")).collect()))
    }
}

fn combine(head: NoiseModel, tail: Option<NoiseModel>) -> NoiseModel {
    match (head, tail) {
        (h, None) => h,
        (NoiseModel::Gaussian { mut sigma }, Some(NoiseModel::Gaussian { sigma: t })) => {
            sigma.extend(t);
            NoiseModel::Gaussian { sigma }
        }
        (NoiseModel::Degenerate { dim: a }, Some(NoiseModel::Degenerate { dim: b })) => NoiseModel::Degenerate { dim: a + b },
        (h, Some(NoiseModel::Product(mut parts))) => {
            parts.insert(0, h);
            NoiseModel::Product(parts)
        }
        (h, Some(t)) => NoiseModel::Product(vec![h, t]),
    }
}

pub fn read_catalog(path: &Path) -> CliResult<CatalogFile> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    check_header(lines.next(), "catalog", CATALOG_VERSION, path)?;
    let (domain, loc_dims) = parse_domain_line(lines.next().unwrap_or(""), path)?;
    let dim = domain.dim();
    let body_start = text.match_indices('\n').nth(1).map_or(text.len(), |(i, _)| i + 1);
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(&text.as_bytes()[body_start..]);
    let ctx = |msg: String| data_err(format!("{}: {msg}", path.display()));

    let header: Vec<String> = rdr.headers().map_err(|e| ctx(e.to_string()))?.iter().map(String::from).collect();
    let typed: Vec<(&str, &str)> = header
        .iter()
        .map(|h| h.rsplit_once(':').ok_or_else(|| ctx(format!("column {h:?} has no type"))))
        .collect::<CliResult<_>>()?;
    let n_fixed = 1 + dim + (dim - loc_dims) + 1;
    if typed.len() != n_fixed && typed.len() != n_fixed + 1 {
        return Err(ctx(format!("expected {n_fixed} or {} columns, got {}", n_fixed + 1, typed.len())));
    }
    let expect = |i: usize, name: Option<&str>, ty: &str| -> CliResult<()> {
        let (n, t) = typed[i];
        if t != ty || name.is_some_and(|want| want != n) {
            return Err(ctx(format!("column {} is {n}:{t}, expected {}:{ty}", i + 1, name.unwrap_or("<axis>"))));
        }
        Ok(())
    };
    expect(0, Some("id"), "str")?;
    let axes: Vec<String> = (0..dim).map(|i| typed[1 + i].0.to_string()).collect();
    for i in 0..dim {
        expect(1 + i, None, "f64")?;
    }
    for (j, a) in axes[loc_dims..].iter().enumerate() {
        expect(1 + dim + j, Some(&format!("{a}_sigma")), "f64")?;
    }
    expect(n_fixed - 1, Some("loc"), "str")?;
    let has_cluster = typed.len() == n_fixed + 1;
    if has_cluster {
        expect(n_fixed, Some("cluster"), "str")?;
    }

    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut maps: HashMap<PathBuf, GridDensity> = HashMap::new();
    let mut events = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 4;
        let rec = rec.map_err(|e| ctx(format!("line {line}: {e}")))?;
        if rec.len() != typed.len() {
            return Err(ctx(format!("line {line}: expected {} fields, got {}", typed.len(), rec.len())));
        }
        let num = |i: usize| -> CliResult<f64> {
            rec[i].trim().parse::<f64>().map_err(|e| ctx(format!("line {line}, column {}: {e}", header[i])))
        };
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(ctx(format!("line {line}: empty id")));
        }
        let coords = (0..dim).map(|i| num(1 + i)).collect::<CliResult<Vec<f64>>>()?;
        let sigmas = (0..dim - loc_dims).map(|j| num(1 + dim + j)).collect::<CliResult<Vec<f64>>>()?;
        if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(ctx(format!("line {line}: sigma {s} must be finite and >= 0")));
        }
        let loc = rec[n_fixed - 1].trim();
        let head = if loc == "none" {
            NoiseModel::Degenerate { dim: loc_dims }
        } else if let Some(s) = loc.strip_prefix("sigma:") {
            let s: f64 = s.parse().map_err(|e| ctx(format!("line {line}: loc sigma: {e}")))?;
            if !(s.is_finite() && s > 0.0) {
                return Err(ctx(format!("line {line}: loc sigma must be > 0, got {s}")));
            }
            NoiseModel::Gaussian { sigma: vec![s; loc_dims] }
        } else if let Some(rel) = loc.strip_prefix("map:") {
            let p = base.join(rel);
            let g = match maps.get(&p) {
                Some(g) => g.clone(),
                None => {
                    let g = read_raster(&p)?;
                    maps.insert(p.clone(), g.clone());
                    g
                }
            };
            if g.dim() != loc_dims {
                return Err(ctx(format!("line {line}: {}D map for {loc_dims} localized coordinates", g.dim())));
            }
            NoiseModel::Gridded(g)
        } else {
            return Err(ctx(format!("line {line}: unrecognized loc {loc:?}")));
        };
        let cluster = if has_cluster && !rec[n_fixed].trim().is_empty() { Some(rec[n_fixed].trim().to_string()) } else { None };
        events.push(CatalogEvent { id, observed: Point::new(coords), noise: combine(head, trailing_model(&sigmas)), cluster });
    }
    let catalog = EventCatalog::new(domain, events).data(&path.display().to_string())?;
    Ok(CatalogFile { catalog, layout: CatalogLayout { axes, loc_dims } })
}

pub fn write_raster(path: &Path, g: &GridDensity) -> CliResult<()> {
    let mut s = format!(
        "{}\nlower {}\nupper {}\nshape {}\n",
        header_line("raster", RASTER_VERSION),
        join_f64(g.lower(), " "),
        join_f64(g.upper(), " "),
        g.shape().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ")
    );
    let last = *g.shape().last().expect("nonempty shape");
    for row in g.weights().chunks(last) {
        s.push_str(&join_f64(row, " "));
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_raster(path: &Path) -> CliResult<GridDensity> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    check_header(lines.next(), "raster", RASTER_VERSION, path)?;
    let ctx = |msg: String| data_err(format!("{}: {msg}", path.display()));
    let mut field = |key: &str| -> CliResult<String> {
        let line = lines.next().unwrap_or("");
        line.strip_prefix(key)
            .filter(|r| r.starts_with(' '))
            .map(|r| r.trim().to_string())
            .ok_or_else(|| ctx(format!("expected a '{key}' line, got {line:?}")))
    };
    let lower = parse_f64_list(&field("lower")?, ' ').map_err(ctx)?;
    let upper = parse_f64_list(&field("upper")?, ' ').map_err(ctx)?;
    let shape = field("shape")?
        .split(' ')
        .map(|t| t.parse::<usize>().map_err(|e| ctx(format!("shape: {e}"))))
        .collect::<CliResult<Vec<usize>>>()?;
    let weights = lines
        .flat_map(str::split_whitespace)
        .map(|t| t.parse::<f64>().map_err(|e| ctx(format!("weight {t:?}: {e}"))))
        .collect::<CliResult<Vec<f64>>>()?;
    GridDensity::new(lower, upper, shape, weights).data(&path.display().to_string())
}
