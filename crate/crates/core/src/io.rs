//! Plain-text formats for chains, property chains and CTMC trajectories.
//!
//! ```text
//! nec-chain v1 n_max=3 seed=7      npc v1 f=node-count seed=7      ctmc v1
//! 1:0                              1                               1:0 0.73
//! 2:1 A                            2                               2:0 1.5
//! 2:1 S                            2                               1:0 0.2
//! 1:0 D:2                          1
//! ```
//!
//! Every line ends with a newline; a missing final newline is reported as a
//! truncated last line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::ctmc::CtmcTrajectory;
use crate::error::{NecError, Result};
use crate::graph::LabeledGraph;
use crate::kernel::{deletes_to, GraphChain, StepRecord, TransitionScheme};
use crate::property::PropertyChainData;

const CHAIN_MAGIC: &str = "nec-chain";
const NPC_MAGIC: &str = "npc";
const CTMC_MAGIC: &str = "ctmc";
const VERSION: &str = "v1";

fn parse_err(line: usize, msg: impl Into<String>) -> NecError {
    NecError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads all lines, insisting on a trailing newline.
fn read_lines(mut reader: impl Read) -> Result<Vec<String>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    if text.is_empty() {
        return Err(parse_err(1, "empty file"));
    }
    let complete = text.ends_with('\n');
    let lines: Vec<String> = text.lines().map(str::to_owned).collect();
    if !complete {
        return Err(parse_err(lines.len(), "truncated line (no terminating newline)"));
    }
    Ok(lines)
}

/// Splits the header into its `key=value` fields after checking the magic
/// word and version.
fn parse_header<'a>(line: &'a str, magic: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let mut tokens = line.split_whitespace();
    let expected = format!("{magic} {VERSION}");
    match (tokens.next(), tokens.next()) {
        (Some(m), Some(VERSION)) if m == magic => {}
        (Some(m), Some(v)) if m == magic => {
            return Err(NecError::Version {
                found: format!("{m} {v}"),
                expected,
            })
        }
        _ => {
            return Err(NecError::Version {
                found: line.to_string(),
                expected,
            })
        }
    }
    tokens
        .map(|tok| {
            tok.split_once('=')
                .ok_or_else(|| parse_err(1, format!("header field {tok:?} is not key=value")))
        })
        .collect()
}

fn header_field<'a>(fields: &[(&'a str, &'a str)], key: &str) -> Option<&'a str> {
    fields.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

fn parse_u64_field(fields: &[(&str, &str)], key: &str) -> Result<Option<u64>> {
    header_field(fields, key)
        .map(|v| {
            v.parse::<u64>()
                .map_err(|_| parse_err(1, format!("header field {key}={v} is not an integer")))
        })
        .transpose()
}

fn parse_graph(line: usize, token: &str) -> Result<LabeledGraph> {
    token
        .parse::<LabeledGraph>()
        .map_err(|e| parse_err(line, format!("bad graph {token:?}: {e}")))
}

fn annotation(rec: &StepRecord) -> String {
    match (rec.scheme, rec.deleted_label) {
        (TransitionScheme::Deletion, Some(label)) => format!("D:{label}"),
        (scheme, _) => scheme.code().to_string(),
    }
}

fn parse_annotation(line: usize, token: &str) -> Result<StepRecord> {
    match token {
        "A" => Ok(StepRecord::addition()),
        "S" => Ok(StepRecord::same()),
        "D" => Ok(StepRecord {
            scheme: TransitionScheme::Deletion,
            deleted_label: None,
        }),
        _ => {
            let label = token
                .strip_prefix("D:")
                .and_then(|l| l.parse::<usize>().ok())
                .ok_or_else(|| {
                    parse_err(line, format!("unknown step annotation {token:?}; expected A, S, D or D:<label>"))
                })?;
            Ok(StepRecord::deletion(label))
        }
    }
}

/// The scheme that moves `g` to `h`, if one does.
fn implied_scheme(g: &LabeledGraph, h: &LabeledGraph) -> Option<TransitionScheme> {
    if g == h {
        Some(TransitionScheme::Same)
    } else if h.n() == g.n() + 1 && g.is_extended_by(h) {
        Some(TransitionScheme::Addition)
    } else if h.n() + 1 == g.n() && (1..=g.n()).any(|l| deletes_to(g, l, h)) {
        Some(TransitionScheme::Deletion)
    } else {
        None
    }
}

pub fn write_chain(chain: &GraphChain, mut out: impl Write) -> Result<()> {
    writeln!(out, "{CHAIN_MAGIC} {VERSION} n_max={} seed={}", chain.n_max(), chain.seed())?;
    let annotated = chain.is_annotated() && chain.len() > 1;
    for (i, g) in chain.states().iter().enumerate() {
        if annotated && i > 0 {
            writeln!(out, "{g} {}", annotation(&chain.steps()[i - 1]))?;
        } else {
            writeln!(out, "{g}")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_chain(reader: impl Read) -> Result<GraphChain> {
    let lines = read_lines(reader)?;
    let fields = parse_header(&lines[0], CHAIN_MAGIC)?;
    let n_max = parse_u64_field(&fields, "n_max")?
        .ok_or_else(|| parse_err(1, "header lacks n_max"))? as usize;
    let seed = parse_u64_field(&fields, "seed")?.unwrap_or(0);
    if lines.len() < 2 {
        return Err(parse_err(1, "chain has no states"));
    }
    let mut states: Vec<LabeledGraph> = Vec::with_capacity(lines.len() - 1);
    let mut steps = Vec::with_capacity(lines.len().saturating_sub(2));
    let mut annotated: Option<bool> = None;
    for (idx, text) in lines.iter().enumerate().skip(1) {
        let line = idx + 1;
        let mut tokens = text.split_whitespace();
        let g = parse_graph(line, tokens.next().ok_or_else(|| parse_err(line, "blank line"))?)?;
        let note = tokens.next();
        if tokens.next().is_some() {
            return Err(parse_err(line, "trailing tokens"));
        }
        if g.n() > n_max {
            return Err(parse_err(line, format!("graph {g} exceeds n_max = {n_max}")));
        }
        match states.last() {
            None => {
                if g.n() != 1 {
                    return Err(parse_err(line, format!("chain must start at 1:0, found {g}")));
                }
                if note.is_some() {
                    return Err(parse_err(line, "the first state carries no step annotation"));
                }
            }
            Some(prev) => {
                let scheme = implied_scheme(prev, &g)
                    .ok_or_else(|| parse_err(line, format!("no single step leads from {prev} to {g}")))?;
                let has_note = note.is_some();
                if *annotated.get_or_insert(has_note) != has_note {
                    return Err(parse_err(line, "step annotations must be on every line or none"));
                }
                if let Some(tok) = note {
                    let rec = parse_annotation(line, tok)?;
                    if rec.scheme != scheme {
                        return Err(parse_err(
                            line,
                            format!("annotated {} but {prev} -> {g} is {}", rec.scheme.code(), scheme.code()),
                        ));
                    }
                    if let Some(label) = rec.deleted_label {
                        if !deletes_to(prev, label, &g) {
                            return Err(parse_err(line, format!("deleting node {label} from {prev} does not give {g}")));
                        }
                    }
                    steps.push(rec);
                }
            }
        }
        states.push(g);
    }
    GraphChain::new(n_max, seed, states, steps)
}

pub fn write_npc(npc: &PropertyChainData, mut out: impl Write) -> Result<()> {
    if npc.property.is_empty() || npc.property.contains(char::is_whitespace) {
        return Err(NecError::arg(format!("property name {:?} cannot be written", npc.property)));
    }
    match npc.source_seed {
        Some(seed) => writeln!(out, "{NPC_MAGIC} {VERSION} f={} seed={seed}", npc.property)?,
        None => writeln!(out, "{NPC_MAGIC} {VERSION} f={}", npc.property)?,
    }
    for y in &npc.symbols {
        writeln!(out, "{y}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_npc(reader: impl Read) -> Result<PropertyChainData> {
    let lines = read_lines(reader)?;
    let fields = parse_header(&lines[0], NPC_MAGIC)?;
    let property = header_field(&fields, "f").ok_or_else(|| parse_err(1, "header lacks f=<name>"))?;
    let seed = parse_u64_field(&fields, "seed")?;
    let symbols = lines
        .iter()
        .enumerate()
        .skip(1)
        .map(|(idx, text)| {
            text.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(idx + 1, format!("{text:?} is not a non-negative integer symbol")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut npc = PropertyChainData::new(property, symbols).map_err(|_| parse_err(1, "no symbols"))?;
    npc.source_seed = seed;
    Ok(npc)
}

pub fn write_trajectory(traj: &CtmcTrajectory, mut out: impl Write) -> Result<()> {
    writeln!(out, "{CTMC_MAGIC} {VERSION}")?;
    for (g, h) in traj.states.iter().zip(&traj.holding_times) {
        writeln!(out, "{g} {h}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory(reader: impl Read) -> Result<CtmcTrajectory> {
    let lines = read_lines(reader)?;
    parse_header(&lines[0], CTMC_MAGIC)?;
    let mut states = Vec::with_capacity(lines.len() - 1);
    let mut holding = Vec::with_capacity(lines.len() - 1);
    for (idx, text) in lines.iter().enumerate().skip(1) {
        let line = idx + 1;
        let (g, h) = text
            .split_once(' ')
            .ok_or_else(|| parse_err(line, "expected `<graph> <holding time>`"))?;
        let h: f64 = h
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("holding time {h:?} is not a number")))?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(parse_err(line, format!("holding time {h} must be positive")));
        }
        let g = parse_graph(line, g)?;
        if states.last() == Some(&g) {
            return Err(parse_err(line, "a jump must change the state"));
        }
        states.push(g);
        holding.push(h);
    }
    CtmcTrajectory::new(states, holding).map_err(|e| parse_err(lines.len(), e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn save_chain(chain: &GraphChain, path: impl AsRef<Path>) -> Result<()> {
    write_chain(chain, create(path.as_ref())?)
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<GraphChain> {
    read_chain(open(path.as_ref())?)
}

pub fn save_npc(npc: &PropertyChainData, path: impl AsRef<Path>) -> Result<()> {
    write_npc(npc, create(path.as_ref())?)
}

pub fn load_npc(path: impl AsRef<Path>) -> Result<PropertyChainData> {
    read_npc(open(path.as_ref())?)
}

pub fn save_trajectory(traj: &CtmcTrajectory, path: impl AsRef<Path>) -> Result<()> {
    write_trajectory(traj, create(path.as_ref())?)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<CtmcTrajectory> {
    read_trajectory(open(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::simulate_ctmc;
    use crate::ernec::{make_ernec, ErnecParams};
    use crate::kernel::simulate;
    use crate::property::{extract_npc, PropertyFn};

    fn model() -> crate::kernel::NecModel {
        make_ernec(&ErnecParams::new(4, 0.5, vec![0.4, 0.3, 0.3, 0.0], vec![0.0, 0.3, 0.3, 0.5], vec![0.6, 0.4, 0.4, 0.5]).unwrap()).unwrap()
    }

    fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Vec<u8> {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        buf
    }

    #[test]
    fn chain_round_trip() {
        let chain = simulate(&model(), 10_000, 3).unwrap();
        let bytes = to_bytes(|b| write_chain(&chain, b));
        assert_eq!(read_chain(&bytes[..]).unwrap(), chain);

        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("nec-chain v1 n_max=4 seed=3\n1:0\n"));
        assert!(text.contains(" D:"));
    }

    #[test]
    fn single_state_chain() {
        let chain = simulate(&model(), 1, 0).unwrap();
        let bytes = to_bytes(|b| write_chain(&chain, b));
        assert_eq!(bytes, b"nec-chain v1 n_max=4 seed=0\n1:0\n");
        assert_eq!(read_chain(&bytes[..]).unwrap(), chain);
    }

    #[test]
    fn plain_and_unlabeled_deletions_are_accepted() {
        let text = "nec-chain v1 n_max=3 seed=1\n1:0\n2:1\n3:3\n2:1\n";
        let chain = read_chain(text.as_bytes()).unwrap();
        assert!(!chain.is_annotated());
        let text = "nec-chain v1 n_max=3 seed=1\n1:0\n2:1 A\n2:1 S\n1:0 D\n";
        let chain = read_chain(text.as_bytes()).unwrap();
        assert_eq!(chain.steps()[2].deleted_label, None);
    }

    #[test]
    fn truncated_file_fails_on_last_line() {
        let chain = simulate(&model(), 200, 5).unwrap();
        let bytes = to_bytes(|b| write_chain(&chain, b));
        let cut = &bytes[..bytes.len() - 3];
        let last = String::from_utf8_lossy(cut).lines().count();
        match read_chain(cut) {
            Err(NecError::Parse { line, .. }) => assert_eq!(line, last),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        let err = read_chain("nec-chain v2 n_max=3 seed=1\n1:0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, NecError::Version { .. }), "{err}");
        let err = read_chain("npc v1 f=x\n1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, NecError::Version { .. }));
        assert!(matches!(read_chain("".as_bytes()), Err(NecError::Parse { line: 1, .. })));
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let cases = [
            ("nec-chain v1 n_max=3 seed=1\n1:0\n2:zz\n", 3),
            ("nec-chain v1 n_max=3 seed=1\n1:0\n3:0\n", 3),
            ("nec-chain v1 n_max=2 seed=1\n1:0\n2:1 A\n3:3 A\n", 4),
            ("nec-chain v1 n_max=3 seed=1\n1:0\n2:1 A\n2:1\n", 4),
            ("nec-chain v1 n_max=3 seed=1\n1:0\n2:1 S\n", 3),
            ("nec-chain v1 n_max=3 seed=1\n1:0\n2:1 A\n3:1 A\n2:0 D:3\n", 5),
            ("nec-chain v1 n_max=3 seed=1\n2:0\n", 2),
        ];
        for (text, expected) in cases {
            match read_chain(text.as_bytes()) {
                Err(NecError::Parse { line, .. }) => assert_eq!(line, expected, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn npc_round_trip() {
        let chain = simulate(&model(), 500, 8).unwrap();
        let npc = extract_npc(&chain, &PropertyFn::edge_count());
        let bytes = to_bytes(|b| write_npc(&npc, b));
        assert!(bytes.starts_with(b"npc v1 f=edge-count seed=8\n"));
        assert_eq!(read_npc(&bytes[..]).unwrap(), npc);
        assert!(matches!(read_npc("npc v1 f=x\n1\n-2\n".as_bytes()), Err(NecError::Parse { line: 3, .. })));
        assert!(matches!(read_npc("npc v9 f=x\n1\n".as_bytes()), Err(NecError::Version { .. })));
    }

    #[test]
    fn trajectory_round_trip() {
        let traj = simulate_ctmc(&model(), &|g| g.n() as f64, 200.0, 4).unwrap();
        let bytes = to_bytes(|b| write_trajectory(&traj, b));
        assert_eq!(read_trajectory(&bytes[..]).unwrap(), traj);
        assert!(matches!(read_trajectory("ctmc v1\n1:0 -1\n".as_bytes()), Err(NecError::Parse { line: 2, .. })));
    }

    #[test]
    fn file_helpers() {
        let dir = std::env::temp_dir().join(format!("necsim-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let chain = simulate(&model(), 100, 2).unwrap();
        let path = dir.join("chain.txt");
        save_chain(&chain, &path).unwrap();
        assert_eq!(load_chain(&path).unwrap(), chain);
        assert!(matches!(load_chain(dir.join("missing.txt")), Err(NecError::Io(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
