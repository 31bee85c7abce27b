// Copyright 2026 The opsflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


//! File formats: canonical JSON documents and NDJSON block logs.

use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use opsflow_core::codec;
use opsflow_core::costmodel::{CostParams, Param};
use opsflow_core::simnet::Block;

pub fn write_canonical<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = codec::to_canonical_string(value).context("encoding canonical json")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// One canonical JSON block per line, in commit order.
pub fn encode_block_log<'a, I: IntoIterator<Item = &'a Block>>(blocks: I) -> Result<String> {
    let mut out = String::new();
    for block in blocks {
        out.push_str(&codec::to_canonical_string(block)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn decode_block_log(text: &str) -> Result<Vec<Block>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("block log line {}", i + 1)))
        .collect()
}

pub fn write_block_log<'a, I: IntoIterator<Item = &'a Block>>(path: &Path, blocks: I) -> Result<()> {
    let text = encode_block_log(blocks)?;
    let mut file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_block_log(path: &Path) -> Result<Vec<Block>> {
    decode_block_log(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

/// `ch=2,cc=2` over the defaults N=10, CH=2, CC=2.
pub fn parse_fixed(s: &str) -> Result<CostParams> {
    let mut params = CostParams::new(10, 2, 2);
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part.split_once('=').with_context(|| format!("expected name=value, got {part:?}"))?;
        let param: Param = name.parse().map_err(anyhow::Error::msg)?;
        params = params.with(param, value.parse().with_context(|| format!("bad value in {part:?}"))?);
    }
    Ok(params)
}

/// `n=2:20`, both bounds inclusive.
pub fn parse_vary(s: &str) -> Result<(Param, RangeInclusive<u64>)> {
    let (name, range) = s.split_once('=').with_context(|| format!("expected name=lo:hi, got {s:?}"))?;
    let param: Param = name.parse().map_err(anyhow::Error::msg)?;
    let (lo, hi) = range.split_once(':').with_context(|| format!("expected lo:hi, got {range:?}"))?;
    let (lo, hi): (u64, u64) = (lo.parse()?, hi.parse()?);
    if lo > hi {
        bail!("empty range {lo}:{hi}");
    }
    if param == Param::N && lo == 0 {
        bail!("N must be at least 1");
    }
    Ok((param, lo..=hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fixed_and_varied_parameters() {
        assert_eq!(parse_fixed("ch=3, cc=1").unwrap(), CostParams::new(10, 3, 1));
        assert_eq!(parse_fixed("").unwrap(), CostParams::new(10, 2, 2));
        assert!(parse_fixed("xx=1").is_err());
        assert_eq!(parse_vary("n=2:20").unwrap(), (Param::N, 2..=20));
        assert!(parse_vary("n=0:3").is_err());
        assert!(parse_vary("cc=5:2").is_err());
    }
}
