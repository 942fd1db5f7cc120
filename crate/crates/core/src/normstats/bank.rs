use std::collections::BTreeMap;
use std::path::Path;

use super::{ChannelStats, WhiteningStats};
use crate::error::{shape_err, Error, Result};
use crate::network::{NamedArray, WeightStore};

/// Statistics recorded for one normalization layer.
#[derive(Clone, Debug, PartialEq)]
pub enum BankEntry {
    Channel(ChannelStats),
    Whitening(WhiteningStats),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BankMode {
    /// Norm layers compute statistics from their own input and record them.
    Capture,
    /// Norm layers read previously recorded statistics; the bank is frozen.
    Apply,
}

/// Normalization statistics keyed by layer index in the network graph.
///
/// Filled during the thumbnail pass, then frozen and shared read-only by
/// every patch pass. Style-side statistics for AdaIN layers are kept in a
/// separate map because they come from a different image.
#[derive(Clone, Debug, PartialEq)]
pub struct StatsBank {
    mode: BankMode,
    entries: BTreeMap<usize, BankEntry>,
    style: BTreeMap<usize, ChannelStats>,
}

impl Default for StatsBank {
    fn default() -> Self {
        Self::new()
    }
}

impl StatsBank {
    pub fn new() -> Self {
        StatsBank { mode: BankMode::Capture, entries: BTreeMap::new(), style: BTreeMap::new() }
    }

    pub fn mode(&self) -> BankMode {
        self.mode
    }

    pub fn freeze(&mut self) {
        self.mode = BankMode::Apply;
    }

    pub fn frozen(mut self) -> Self {
        self.freeze();
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, layer: usize, entry: BankEntry) -> Result<()> {
        if self.mode == BankMode::Apply {
            return Err(Error::State(format!("cannot record layer {layer}: statistics bank is frozen")));
        }
        self.entries.insert(layer, entry);
        Ok(())
    }

    pub fn set_style(&mut self, layer: usize, stats: ChannelStats) -> Result<()> {
        if self.mode == BankMode::Apply {
            return Err(Error::State(format!("cannot record style for layer {layer}: bank is frozen")));
        }
        self.style.insert(layer, stats);
        Ok(())
    }

    pub fn get(&self, layer: usize) -> Option<&BankEntry> {
        self.entries.get(&layer)
    }

    pub fn channel(&self, layer: usize) -> Result<&ChannelStats> {
        match self.entries.get(&layer) {
            Some(BankEntry::Channel(s)) => Ok(s),
            Some(BankEntry::Whitening(_)) => {
                Err(Error::State(format!("layer {layer} holds whitening statistics, not channel statistics")))
            }
            None => Err(Error::State(format!("no captured statistics for norm layer {layer}"))),
        }
    }

    pub fn whitening(&self, layer: usize) -> Result<&WhiteningStats> {
        match self.entries.get(&layer) {
            Some(BankEntry::Whitening(s)) => Ok(s),
            Some(BankEntry::Channel(_)) => {
                Err(Error::State(format!("layer {layer} holds channel statistics, not whitening statistics")))
            }
            None => Err(Error::State(format!("no captured statistics for norm layer {layer}"))),
        }
    }

    pub fn style(&self, layer: usize) -> Result<&ChannelStats> {
        self.style
            .get(&layer)
            .ok_or_else(|| Error::State(format!("no style statistics for AdaIN layer {layer}")))
    }

    /// Approximate resident size of the recorded statistics.
    pub fn size_bytes(&self) -> usize {
        let entries: usize = self
            .entries
            .values()
            .map(|e| match e {
                BankEntry::Channel(s) => 2 * s.mean().len(),
                BankEntry::Whitening(s) => s.mean().len() + s.inv_sqrt_cov_all().len(),
            })
            .sum();
        let style: usize = self.style.values().map(|s| 2 * s.mean().len()).sum();
        4 * (entries + style)
    }

    /// Encodes the bank as `stats/<layer>/{mean,std,invsqrtcov,style_mean,style_std}`.
    pub fn to_store(&self) -> Result<WeightStore> {
        let mut store = WeightStore::new();
        for (&id, entry) in &self.entries {
            match entry {
                BankEntry::Channel(s) => {
                    let d = vec![s.batch(), s.channels()];
                    store.insert(format!("stats/{id}/mean"), NamedArray::new(d.clone(), s.mean().to_vec())?)?;
                    store.insert(format!("stats/{id}/std"), NamedArray::new(d, s.std().to_vec())?)?;
                }
                BankEntry::Whitening(s) => {
                    let (n, c) = (s.batch(), s.channels());
                    store.insert(format!("stats/{id}/mean"), NamedArray::new(vec![n, c], s.mean().to_vec())?)?;
                    store.insert(
                        format!("stats/{id}/invsqrtcov"),
                        NamedArray::new(vec![n, c, c], s.inv_sqrt_cov_all().to_vec())?,
                    )?;
                }
            }
        }
        for (&id, s) in &self.style {
            let d = vec![s.batch(), s.channels()];
            store.insert(format!("stats/{id}/style_mean"), NamedArray::new(d.clone(), s.mean().to_vec())?)?;
            store.insert(format!("stats/{id}/style_std"), NamedArray::new(d, s.std().to_vec())?)?;
        }
        Ok(store)
    }

    /// Rebuilds a frozen bank from its container encoding. Entries whose
    /// names do not start with `stats/` are ignored.
    pub fn from_store(store: &WeightStore) -> Result<Self> {
        let mut fields: BTreeMap<usize, BTreeMap<&str, &NamedArray>> = BTreeMap::new();
        for (name, array) in store.iter() {
            let Some(rest) = name.strip_prefix("stats/") else { continue };
            let (id, field) = rest
                .split_once('/')
                .ok_or_else(|| shape_err!("malformed statistics entry `{name}`"))?;
            let id: usize = id.parse().map_err(|_| shape_err!("bad layer id in `{name}`"))?;
            fields.entry(id).or_default().insert(field, array);
        }
        let mut bank = StatsBank::new();
        for (id, f) in fields {
            let mat = |a: &NamedArray| -> Result<(usize, usize)> {
                match a.dims() {
                    [n, c] => Ok((*n, *c)),
                    d => Err(shape_err!("statistics for layer {id} have dims {d:?}, expected [n, c]")),
                }
            };
            match (f.get("mean"), f.get("std"), f.get("invsqrtcov")) {
                (Some(mean), Some(std), None) => {
                    let (n, c) = mat(mean)?;
                    let s = ChannelStats::new(n, c, mean.data().to_vec(), std.data().to_vec())?;
                    bank.insert(id, BankEntry::Channel(s))?;
                }
                (Some(mean), None, Some(cov)) => {
                    let (n, c) = mat(mean)?;
                    let s = WhiteningStats::new(n, c, mean.data().to_vec(), cov.data().to_vec())?;
                    bank.insert(id, BankEntry::Whitening(s))?;
                }
                (None, None, None) => {}
                _ => return Err(shape_err!("incomplete statistics for layer {id}")),
            }
            match (f.get("style_mean"), f.get("style_std")) {
                (Some(mean), Some(std)) => {
                    let (n, c) = mat(mean)?;
                    bank.set_style(id, ChannelStats::new(n, c, mean.data().to_vec(), std.data().to_vec())?)?;
                }
                (None, None) => {}
                _ => return Err(shape_err!("incomplete style statistics for layer {id}")),
            }
        }
        bank.freeze();
        Ok(bank)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_store()?.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_store(&WeightStore::load(path)?)
    }
}
