//! Primitive keys and per-device profiling tables.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;

use super::device::DeviceSimulator;
use crate::error::{Error, Result};
use crate::space::BlockwiseSpace;

/// One inverted-bottleneck block configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimitiveKey {
    pub in_shape: [usize; 3],
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub expansion: usize,
}

impl PrimitiveKey {
    pub fn out_shape(&self) -> [usize; 3] {
        let [_, h, w] = self.in_shape;
        [self.out_channels, h.div_ceil(self.stride), w.div_ceil(self.stride)]
    }

    /// Multiply-accumulates of expand 1×1, depthwise k×k and project 1×1.
    pub fn macs(&self) -> f64 {
        let [c, h, w] = self.in_shape.map(|v| v as f64);
        let [co, ho, wo] = self.out_shape().map(|v| v as f64);
        let hidden = c * self.expansion as f64;
        let k2 = (self.kernel * self.kernel) as f64;
        h * w * c * hidden + ho * wo * hidden * k2 + ho * wo * hidden * co
    }
}

impl fmt::Display for PrimitiveKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [c, h, w] = self.in_shape;
        write!(
            f,
            "ib_c{c}_h{h}_w{w}_o{}_k{}_s{}_e{}",
            self.out_channels, self.kernel, self.stride, self.expansion
        )
    }
}

impl FromStr for PrimitiveKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed primitive key {s:?}"));
        let rest = s.strip_prefix("ib_").ok_or_else(bad)?;
        let mut fields = [0usize; 7];
        let tags = ["c", "h", "w", "o", "k", "s", "e"];
        let parts: Vec<&str> = rest.split('_').collect();
        if parts.len() != tags.len() {
            return Err(bad());
        }
        for ((slot, part), tag) in fields.iter_mut().zip(parts).zip(tags) {
            *slot = part.strip_prefix(tag).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        }
        let [c, h, w, o, k, st, e] = fields;
        Ok(Self {
            in_shape: [c, h, w],
            out_channels: o,
            kernel: k,
            stride: st,
            expansion: e,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfilingTable {
    pub device_name: String,
    pub metric: String,
    entries: IndexMap<PrimitiveKey, f64>,
}

impl ProfilingTable {
    pub fn new(device_name: impl Into<String>, metric: impl Into<String>) -> Self {
        Self {
            device_name: device_name.into(),
            metric: metric.into(),
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, key: PrimitiveKey, cost: f64) -> Result<()> {
        if !(cost.is_finite() && cost > 0.0) {
            return Err(Error::InvalidArgument(format!("cost for {key} must be positive, got {cost}")));
        }
        if self.entries.insert(key, cost).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate primitive key {key}")));
        }
        Ok(())
    }

    pub fn cost(&self, key: &PrimitiveKey) -> Result<f64> {
        self.entries
            .get(key)
            .copied()
            .ok_or_else(|| Error::Missing(format!("primitive key {key} not in profiling table")))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PrimitiveKey, &f64)> {
        self.entries.iter()
    }

    /// CSV `primitive_key,cost` preceded by a `# device=… metric=…` line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# device={} metric={}", self.device_name, self.metric).map_err(|e| Error::io("<table>", e))?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["primitive_key", "cost"])?;
        for (key, cost) in &self.entries {
            out.write_record([key.to_string(), format!("{cost}")])?;
        }
        out.flush().map_err(|e| Error::io("<table>", e))?;
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut device = String::from("unknown");
        let mut metric = String::from("cost");
        if let Some(first) = text.lines().next().and_then(|l| l.strip_prefix('#')) {
            for kv in first.split_whitespace() {
                match kv.split_once('=') {
                    Some(("device", v)) => device = v.to_string(),
                    Some(("metric", v)) => metric = v.to_string(),
                    _ => {}
                }
            }
        }
        let mut table = Self::new(device, metric);
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["primitive_key", "cost"] {
            return Err(Error::Parse {
                line: 1,
                msg: "expected header primitive_key,cost".into(),
            });
        }
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let key: PrimitiveKey = record[0].parse().map_err(|e: Error| Error::Parse { line, msg: e.to_string() })?;
            let cost: f64 = record[1].parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad cost {:?}", &record[1]),
            })?;
            table.insert(key, cost).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(&text)
    }
}

/// Measures every reachable primitive of `space` on the simulated device.
pub fn profile_primitives(space: &BlockwiseSpace, device: &DeviceSimulator) -> ProfilingTable {
    let mut table = ProfilingTable::new(device.name(), device.metric());
    for key in space.reachable_primitives() {
        table
            .insert(key, device.primitive_cost(&key))
            .expect("simulator costs are positive and keys unique");
    }
    table
}
