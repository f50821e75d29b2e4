//! Posterior chains on disk.
//!
//! CSV chains start with `#nhpp-chain v1`, then a `#meta <json>` line and a
//! header `iteration,log_posterior,accepted,<params...>`. Binary chains are
//! the magic `NHPPCHN1`, a little-endian u64 length and that many bytes of
//! the same JSON metadata, the u64 row count, then rows of little-endian f64
//! `log_posterior, accepted, <params...>`.

use std::path::Path;

use nhpp_core::mcmc::{AcceptanceRates, PosteriorChain};
use serde::{Deserialize, Serialize};

use crate::config::ChainFormat;
use crate::error::{data_err, CliResult, Context};
use crate::io::{check_header, header_line, read_text, write_atomic};

pub const CHAIN_VERSION: u32 = 1;
const MAGIC_PREFIX: &[u8] = b"NHPPCHN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainMeta {
    pub param_names: Vec<String>,
    pub seed: u64,
    pub chain_index: u64,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub config_hash: String,
    pub catalog_hash: String,
    pub acceptance: AcceptanceRates,
    pub proposal_cov: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl ChainMeta {
    pub fn of(chain: &PosteriorChain, config_hash: &str, catalog_hash: &str) -> Self {
        Self {
            param_names: chain.param_names.clone(),
            seed: chain.seed,
            chain_index: chain.chain_index,
            n_iter: chain.n_iter,
            burn_in: chain.burn_in,
            thin: chain.thin,
            config_hash: config_hash.into(),
            catalog_hash: catalog_hash.into(),
            acceptance: chain.acceptance,
            proposal_cov: chain.proposal_cov.clone(),
            warnings: chain.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StoredChain {
    pub meta: ChainMeta,
    pub chain: PosteriorChain,
}

pub fn chain_file_name(index: u64, format: ChainFormat) -> String {
    match format {
        ChainFormat::Csv => format!("chain_{index}.csv"),
        ChainFormat::Binary => format!("chain_{index}.bin"),
    }
}

pub fn write_chain(path: &Path, chain: &PosteriorChain, meta: &ChainMeta, format: ChainFormat) -> CliResult<()> {
    let meta_json = serde_json::to_string(meta).data("chain metadata")?;
    let bytes = match format {
        ChainFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let mut header = vec!["iteration".to_string(), "log_posterior".into(), "accepted".into()];
            header.extend(chain.param_names.iter().cloned());
            w.write_record(&header).data("chain")?;
            for (i, d) in chain.draws.iter().enumerate() {
                let mut rec = vec![
                    (chain.burn_in + i * chain.thin).to_string(),
                    chain.log_posterior[i].to_string(),
                    u8::from(chain.accepted[i]).to_string(),
                ];
                rec.extend(d.iter().map(|x| x.to_string()));
                w.write_record(&rec).data("chain")?;
            }
            let mut out = format!("{}\n#meta {meta_json}\n", header_line("chain", CHAIN_VERSION)).into_bytes();
            out.extend(w.into_inner().map_err(|e| data_err(e.to_string()))?);
            out
        }
        ChainFormat::Binary => {
            let mut out = Vec::new();
            out.extend_from_slice(MAGIC_PREFIX);
            out.extend_from_slice(CHAIN_VERSION.to_string().as_bytes());
            out.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
            out.extend_from_slice(meta_json.as_bytes());
            out.extend_from_slice(&(chain.draws.len() as u64).to_le_bytes());
            for (i, d) in chain.draws.iter().enumerate() {
                out.extend_from_slice(&chain.log_posterior[i].to_le_bytes());
                out.extend_from_slice(&f64::from(u8::from(chain.accepted[i])).to_le_bytes());
                for x in d {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            out
        }
    };
    write_atomic(path, &bytes)
}

fn assemble(meta: ChainMeta, rows: Vec<(f64, bool, Vec<f64>)>) -> StoredChain {
    let chain = PosteriorChain {
        param_names: meta.param_names.clone(),
        log_posterior: rows.iter().map(|r| r.0).collect(),
        accepted: rows.iter().map(|r| r.1).collect(),
        draws: rows.into_iter().map(|r| r.2).collect(),
        seed: meta.seed,
        chain_index: meta.chain_index,
        n_iter: meta.n_iter,
        burn_in: meta.burn_in,
        thin: meta.thin,
        acceptance: meta.acceptance,
        proposal_cov: meta.proposal_cov.clone(),
        warnings: meta.warnings.clone(),
        final_latent: Vec::new(),
    };
    StoredChain { meta, chain }
}

/// Reads either chain format, telling them apart by the leading bytes.
pub fn read_chain(path: &Path) -> CliResult<StoredChain> {
    let bytes = std::fs::read(path).data(&format!("cannot read {}", path.display()))?;
    if bytes.starts_with(MAGIC_PREFIX) {
        read_binary(path, &bytes)
    } else {
        read_csv(path)
    }
}

fn read_csv(path: &Path) -> CliResult<StoredChain> {
    let text = read_text(path)?;
    let ctx = |msg: String| data_err(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    check_header(lines.next(), "chain", CHAIN_VERSION, path)?;
    let meta_line = lines.next().and_then(|l| l.strip_prefix("#meta ")).ok_or_else(|| ctx("missing #meta line".into()))?;
    let meta: ChainMeta = serde_json::from_str(meta_line).map_err(|e| ctx(format!("metadata: {e}")))?;
    let body_start = text.match_indices('\n').nth(1).map_or(text.len(), |(i, _)| i + 1);
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(&text.as_bytes()[body_start..]);
    let header: Vec<String> = rdr.headers().map_err(|e| ctx(e.to_string()))?.iter().map(String::from).collect();
    let mut want = vec!["iteration".to_string(), "log_posterior".into(), "accepted".into()];
    want.extend(meta.param_names.iter().cloned());
    if header != want {
        return Err(ctx(format!("columns {header:?} do not match {want:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx(e.to_string()))?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|t| t.parse::<f64>().map_err(|e| ctx(format!("{t:?}: {e}"))))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push((vals[0], vals[1] != 0.0, vals[2..].to_vec()));
    }
    Ok(assemble(meta, rows))
}

fn read_binary(path: &Path, bytes: &[u8]) -> CliResult<StoredChain> {
    let ctx = |msg: String| data_err(format!("{}: {msg}", path.display()));
    let version = bytes.get(MAGIC_PREFIX.len()).copied();
    if version != Some(b'0' + CHAIN_VERSION as u8) {
        return Err(ctx(format!("binary chain version is not supported (expected {CHAIN_VERSION})")));
    }
    let mut pos = MAGIC_PREFIX.len() + 1;
    let mut take = |n: usize| -> CliResult<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| ctx("truncated file".into()))?;
        pos += n;
        Ok(s)
    };
    let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().expect("8 bytes"));
    let meta_len = u64_at(take(8)?) as usize;
    let meta: ChainMeta = serde_json::from_slice(take(meta_len)?).map_err(|e| ctx(format!("metadata: {e}")))?;
    let n_rows = u64_at(take(8)?) as usize;
    let width = 2 + meta.param_names.len();
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let vals: Vec<f64> =
            take(8 * width)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        rows.push((vals[0], vals[1] != 0.0, vals[2..].to_vec()));
    }
    if take(1).is_ok() {
        return Err(ctx("trailing bytes after the last row".into()));
    }
    Ok(assemble(meta, rows))
}
