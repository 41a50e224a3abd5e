//! JSON persistence. Every float in the instance payload is stored as a C99
//! hex-float string, so save/load round-trips are bit-exact on every platform.

use super::{
    AmpEntry, Arc, ArcClass, BanInstance, EnergyParams, InstanceError, InstanceMeta, NodeId,
    NodeKind, Point, Relay, Scenario, TxAmp,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a valid instance document: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("bad float {token:?} in {context}: {detail}")]
    Float { context: String, token: String, detail: String },
    #[error("malformed instance document: {detail}")]
    Schema { detail: String },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Exponent shift by an exact power of two, valid for 2^-1074 ..= 2^1023.
fn pow2(e: i64) -> f64 {
    debug_assert!((-1074..=1023).contains(&e));
    if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (e + 1074))
    }
}

/// Formats a finite f64 as a C99 hex-float literal (as `printf %a` would).
pub fn to_hex_string(v: f64) -> String {
    assert!(v.is_finite(), "hex-float encoding is defined for finite values");
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    let (lead, exp) = if biased == 0 {
        if mantissa == 0 {
            return format!("{sign}0x0p+0");
        }
        ("0", -1022)
    } else {
        ("1", biased - 1023)
    };
    let frac = format!("{:013x}", mantissa);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{frac}p{exp:+}")
    }
}

/// Parses a C99 hex-float literal. Values emitted by [`to_hex_string`] parse
/// back bit-exactly.
pub fn parse_hex_string(text: &str) -> Result<f64, String> {
    let s = text.trim();
    let (sign, s) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    let s = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .ok_or("missing 0x prefix")?;
    let p = s
        .find(['p', 'P'])
        .ok_or("missing binary exponent (p...)")?;
    let (digits, exp_txt) = (&s[..p], &s[p + 1..]);
    let exponent: i64 = exp_txt
        .parse::<i32>()
        .map_err(|_| format!("bad exponent {exp_txt:?}"))? as i64;

    let (int_part, frac_part) = match digits.find('.') {
        Some(dot) => (&digits[..dot], &digits[dot + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err("no mantissa digits".to_string());
    }

    // Fold up to 28 hex digits (112 bits) into the mantissa; anything beyond
    // only influences the sticky bit.
    let mut mant: u128 = 0;
    let mut used = 0u32;
    let mut extra_exp: i64 = 0;
    let mut frac_digits: i64 = 0;
    let mut sticky = false;
    let mut fold = |c: char, fractional: bool| -> Result<(), String> {
        let d = c.to_digit(16).ok_or(format!("bad hex digit {c:?}"))? as u128;
        if used < 28 {
            mant = mant * 16 + d;
            if fractional {
                frac_digits += 1;
            }
            if mant > 0 {
                used += 1;
            }
        } else if fractional {
            sticky |= d != 0;
        } else {
            extra_exp += 4;
            sticky |= d != 0;
        }
        Ok(())
    };
    for c in int_part.chars() {
        fold(c, false)?;
    }
    for c in frac_part.chars() {
        fold(c, true)?;
    }
    if mant == 0 {
        if sticky {
            return Err("value has too many significant digits".to_string());
        }
        return Ok(sign * 0.0);
    }
    if sticky {
        mant |= 1;
    }

    let e = exponent + extra_exp - 4 * frac_digits;
    if e < -1074 {
        return Err("magnitude underflows f64".to_string());
    }
    let mut value = mant as f64;
    let mut shift = e;
    while shift > 971 {
        value *= pow2(971);
        shift -= 971;
        if value.is_infinite() {
            return Err("magnitude overflows f64".to_string());
        }
    }
    value *= pow2(shift);
    if value.is_infinite() {
        return Err("magnitude overflows f64".to_string());
    }
    Ok(sign * value)
}

// ---------------------------------------------------------------------------
// On-disk schema. Every float field is a hex-float string.

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<InstanceMeta>,
    nodes: Vec<NodeFile>,
    energy_params: EnergyFile,
    arcs: Vec<ArcFile>,
    scenarios: Vec<ScenarioFile>,
    capacities: Vec<String>,
    relay_budget: u32,
}

#[derive(Serialize, Deserialize)]
struct NodeFile {
    kind: NodeKind,
    index: usize,
    position: [String; 2],
}

#[derive(Serialize, Deserialize)]
struct EnergyFile {
    tx_circuit: String,
    rx_circuit: String,
    tx_amp: TxAmpFile,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TxAmpFile {
    Uniform(String),
    ByExponent(Vec<[String; 2]>),
}

#[derive(Serialize, Deserialize)]
struct NodeRefFile {
    kind: NodeKind,
    index: usize,
}

#[derive(Serialize, Deserialize)]
struct ArcFile {
    tail: NodeRefFile,
    head: NodeRefFile,
    class: ArcClass,
    distance: String,
    pathloss: String,
    energy: String,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    id: usize,
    demand: Vec<Vec<String>>,
}

fn hex(v: f64) -> String {
    to_hex_string(v)
}

fn unhex(token: &str, context: &str) -> Result<f64, IoError> {
    parse_hex_string(token).map_err(|detail| IoError::Float {
        context: context.to_string(),
        token: token.to_string(),
        detail,
    })
}

fn node_file(kind: NodeKind, index: usize, p: &Point) -> NodeFile {
    NodeFile { kind, index, position: [hex(p.x), hex(p.y)] }
}

fn to_file(inst: &BanInstance) -> InstanceFile {
    let mut nodes = Vec::with_capacity(inst.num_nodes());
    for (i, p) in inst.biosensors().iter().enumerate() {
        nodes.push(node_file(NodeKind::Biosensor, i, p));
    }
    for (i, r) in inst.relays().iter().enumerate() {
        nodes.push(node_file(NodeKind::Relay, i, &r.position));
    }
    for (i, p) in inst.sinks().iter().enumerate() {
        nodes.push(node_file(NodeKind::Sink, i, p));
    }
    let energy = inst.energy_params();
    InstanceFile {
        meta: inst.meta().cloned(),
        nodes,
        energy_params: EnergyFile {
            tx_circuit: hex(energy.tx_circuit),
            rx_circuit: hex(energy.rx_circuit),
            tx_amp: match &energy.tx_amp {
                TxAmp::Uniform(a) => TxAmpFile::Uniform(hex(*a)),
                TxAmp::ByExponent(entries) => TxAmpFile::ByExponent(
                    entries.iter().map(|e| [hex(e.pathloss), hex(e.amp)]).collect(),
                ),
            },
        },
        arcs: inst
            .arcs()
            .iter()
            .map(|a| ArcFile {
                tail: NodeRefFile { kind: a.tail.kind, index: a.tail.index },
                head: NodeRefFile { kind: a.head.kind, index: a.head.index },
                class: a.class,
                distance: hex(a.distance),
                pathloss: hex(a.pathloss),
                energy: hex(a.energy),
            })
            .collect(),
        scenarios: inst
            .scenarios()
            .iter()
            .map(|sc| ScenarioFile {
                id: sc.id,
                demand: sc
                    .demand
                    .iter()
                    .map(|row| row.iter().map(|&d| hex(d)).collect())
                    .collect(),
            })
            .collect(),
        capacities: inst.relays().iter().map(|r| hex(r.capacity)).collect(),
        relay_budget: inst.relay_budget(),
    }
}

fn from_file(file: InstanceFile) -> Result<BanInstance, IoError> {
    let mut counts = [0usize; 3];
    for n in &file.nodes {
        counts[match n.kind {
            NodeKind::Biosensor => 0,
            NodeKind::Relay => 1,
            NodeKind::Sink => 2,
        }] += 1;
    }
    let mut biosensors = vec![None; counts[0]];
    let mut relay_points = vec![None; counts[1]];
    let mut sinks = vec![None; counts[2]];
    for n in &file.nodes {
        let ctx = format!("position of {} {}", serde_kind(n.kind), n.index);
        let p = Point::new(unhex(&n.position[0], &ctx)?, unhex(&n.position[1], &ctx)?);
        let slot = match n.kind {
            NodeKind::Biosensor => biosensors.get_mut(n.index),
            NodeKind::Relay => relay_points.get_mut(n.index),
            NodeKind::Sink => sinks.get_mut(n.index),
        };
        match slot {
            Some(slot @ None) => *slot = Some(p),
            Some(_) => {
                return Err(IoError::Schema {
                    detail: format!("duplicate node {} {}", serde_kind(n.kind), n.index),
                })
            }
            None => {
                return Err(IoError::Schema {
                    detail: format!("node index {} out of range for {}", n.index, serde_kind(n.kind)),
                })
            }
        }
    }
    let biosensors: Vec<Point> = biosensors.into_iter().flatten().collect();
    let relay_points: Vec<Point> = relay_points.into_iter().flatten().collect();
    let sinks: Vec<Point> = sinks.into_iter().flatten().collect();
    if biosensors.len() != counts[0] || relay_points.len() != counts[1] || sinks.len() != counts[2] {
        return Err(IoError::Schema { detail: "node indices are not contiguous from 0".to_string() });
    }
    if file.capacities.len() != relay_points.len() {
        return Err(IoError::Schema {
            detail: format!(
                "{} capacities for {} relays",
                file.capacities.len(),
                relay_points.len()
            ),
        });
    }
    let relays: Vec<Relay> = relay_points
        .into_iter()
        .zip(&file.capacities)
        .enumerate()
        .map(|(i, (position, cap))| {
            Ok(Relay { position, capacity: unhex(cap, &format!("capacity of relay {i}"))? })
        })
        .collect::<Result<_, IoError>>()?;

    let energy = EnergyParams {
        tx_circuit: unhex(&file.energy_params.tx_circuit, "energy_params.tx_circuit")?,
        rx_circuit: unhex(&file.energy_params.rx_circuit, "energy_params.rx_circuit")?,
        tx_amp: match &file.energy_params.tx_amp {
            TxAmpFile::Uniform(a) => TxAmp::Uniform(unhex(a, "energy_params.tx_amp")?),
            TxAmpFile::ByExponent(entries) => TxAmp::ByExponent(
                entries
                    .iter()
                    .map(|[pl, amp]| {
                        Ok(AmpEntry {
                            pathloss: unhex(pl, "energy_params.tx_amp exponent")?,
                            amp: unhex(amp, "energy_params.tx_amp amp")?,
                        })
                    })
                    .collect::<Result<_, IoError>>()?,
            ),
        },
    };

    let arcs: Vec<Arc> = file
        .arcs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let ctx = format!("arc {i}");
            Ok(Arc {
                tail: NodeId { kind: a.tail.kind, index: a.tail.index },
                head: NodeId { kind: a.head.kind, index: a.head.index },
                class: a.class,
                distance: unhex(&a.distance, &ctx)?,
                pathloss: unhex(&a.pathloss, &ctx)?,
                energy: unhex(&a.energy, &ctx)?,
            })
        })
        .collect::<Result<_, IoError>>()?;

    let scenarios: Vec<Scenario> = file
        .scenarios
        .iter()
        .map(|sc| {
            Ok(Scenario {
                id: sc.id,
                demand: sc
                    .demand
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|d| unhex(d, &format!("scenario {} demand", sc.id)))
                            .collect()
                    })
                    .collect::<Result<_, IoError>>()?,
            })
        })
        .collect::<Result<_, IoError>>()?;

    Ok(BanInstance::new(
        biosensors,
        relays,
        sinks,
        arcs,
        scenarios,
        file.relay_budget,
        energy,
        file.meta,
    )?)
}

fn serde_kind(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Biosensor => "biosensor",
        NodeKind::Relay => "relay",
        NodeKind::Sink => "sink",
    }
}

/// Serializes an instance to the JSON document format.
pub fn to_json_string(inst: &BanInstance) -> String {
    let mut text = serde_json::to_string_pretty(&to_file(inst)).expect("instance serialization");
    text.push('\n');
    text
}

/// Parses an instance from its JSON document representation and re-validates
/// every structural invariant.
pub fn from_json_str(text: &str) -> Result<BanInstance, IoError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|source| IoError::Json {
        path: PathBuf::from("<string>"),
        source,
    })?;
    from_file(file)
}

pub fn save_instance(inst: &BanInstance, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, to_json_string(inst)).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_instance(path: &Path) -> Result<BanInstance, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: InstanceFile = serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    from_file(file)
}
