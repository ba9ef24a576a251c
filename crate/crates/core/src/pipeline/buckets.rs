//! Editable partitions of codes into named buckets (reviewed-code clusters
//! and themes).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::model::label_key;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub bucket_id: String,
    pub name: String,
    pub members: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketSet {
    pub id_prefix: String,
    pub next_id: u32,
    pub buckets: Vec<Bucket>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum BucketEdit {
    MoveCode { code_id: String, to: String },
    Create { name: String, members: Vec<String> },
    Rename { bucket_id: String, name: String },
    Delete {
        bucket_id: String,
        #[serde(default)]
        destination: Option<String>,
    },
    Merge {
        bucket_ids: Vec<String>,
        #[serde(default)]
        name: Option<String>,
    },
}

/// `base`, or `base (2)`, `base (3)`... whichever is free.
fn unique_name(base: &str, taken: &BTreeSet<String>) -> String {
    let base = if base.trim().is_empty() { "Unnamed" } else { base.trim() };
    if !taken.contains(&label_key(base)) {
        return base.to_string();
    }
    (2..)
        .map(|n| format!("{base} ({n})"))
        .find(|candidate| !taken.contains(&label_key(candidate)))
        .expect("unbounded suffix search")
}

impl BucketSet {
    pub fn new(id_prefix: &str) -> Self {
        BucketSet {
            id_prefix: id_prefix.to_string(),
            next_id: 0,
            buckets: Vec::new(),
        }
    }

    fn fresh_id(&mut self) -> String {
        self.next_id += 1;
        format!("{}-{:03}", self.id_prefix, self.next_id)
    }

    /// Builds a partition of `universe` from proposed groups, repairing
    /// whatever the proposal got wrong. Returns a warning per repair.
    pub fn from_groups(
        id_prefix: &str,
        groups: Vec<(String, Vec<String>)>,
        universe: &[String],
        singleton_name: impl Fn(&str) -> String,
    ) -> (BucketSet, Vec<String>) {
        let known: BTreeSet<&str> = universe.iter().map(String::as_str).collect();
        let mut placed: BTreeMap<String, String> = BTreeMap::new();
        let mut warnings = Vec::new();
        let mut set = BucketSet::new(id_prefix);
        let mut proposed: Vec<(String, BTreeSet<String>)> = Vec::new();

        for (name, members) in groups {
            let mut kept = BTreeSet::new();
            for m in members {
                if !known.contains(m.as_str()) {
                    warnings.push(format!("dropped unknown item {m:?} from {name:?}"));
                } else if let Some(first) = placed.get(&m) {
                    warnings.push(format!("{m} listed again in {name:?}; kept in {first:?}"));
                } else {
                    placed.insert(m.clone(), name.clone());
                    kept.insert(m);
                }
            }
            if kept.is_empty() {
                warnings.push(format!("dropped empty group {name:?}"));
            } else {
                proposed.push((name, kept));
            }
        }
        for item in universe {
            if !placed.contains_key(item) {
                warnings.push(format!("{item} was not grouped; placed in its own bucket"));
                proposed.push((singleton_name(item), BTreeSet::from([item.clone()])));
                placed.insert(item.clone(), String::new());
            }
        }
        let mut taken = BTreeSet::new();
        for (name, members) in proposed {
            let unique = unique_name(&name, &taken);
            if unique != name.trim() {
                warnings.push(format!("duplicate name {name:?} renamed to {unique:?}"));
            }
            taken.insert(label_key(&unique));
            let bucket_id = set.fresh_id();
            set.buckets.push(Bucket {
                bucket_id,
                name: unique,
                members,
            });
        }
        (set, warnings)
    }

    pub fn bucket(&self, id: &str) -> Result<&Bucket> {
        self.buckets
            .iter()
            .find(|b| b.bucket_id == id)
            .ok_or_else(|| Error::NotFound(format!("bucket {id}")))
    }

    fn position(&self, id: &str) -> Result<usize> {
        self.buckets
            .iter()
            .position(|b| b.bucket_id == id)
            .ok_or_else(|| Error::NotFound(format!("bucket {id}")))
    }

    pub fn bucket_of(&self, item: &str) -> Option<&Bucket> {
        self.buckets.iter().find(|b| b.members.contains(item))
    }

    fn names_except(&self, skip: &[&str]) -> BTreeSet<String> {
        self.buckets
            .iter()
            .filter(|b| !skip.contains(&b.bucket_id.as_str()))
            .map(|b| label_key(&b.name))
            .collect()
    }

    fn checked_name(&self, name: &str, skip: &[&str]) -> Result<String> {
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::InvalidArgument("bucket name must not be empty".into()));
        }
        if self.names_except(skip).contains(&label_key(name)) {
            return Err(Error::NameConflict(name.to_string()));
        }
        Ok(name.to_string())
    }

    fn take_member(&mut self, item: &str) -> Result<()> {
        let b = self
            .buckets
            .iter_mut()
            .find(|b| b.members.contains(item))
            .ok_or_else(|| Error::NotFound(format!("code {item} is not in any bucket")))?;
        b.members.remove(item);
        Ok(())
    }

    fn drop_empty(&mut self) {
        self.buckets.retain(|b| !b.members.is_empty());
    }

    /// Applies one edit. On error the set is unchanged.
    pub fn apply(&mut self, edit: &BucketEdit) -> Result<()> {
        let mut next = self.clone();
        next.apply_in_place(edit)?;
        *self = next;
        Ok(())
    }

    fn apply_in_place(&mut self, edit: &BucketEdit) -> Result<()> {
        match edit {
            BucketEdit::MoveCode { code_id, to } => {
                let dest = self.position(to)?;
                if self.buckets[dest].members.contains(code_id) {
                    return Ok(());
                }
                self.take_member(code_id)?;
                self.buckets[dest].members.insert(code_id.clone());
            }
            BucketEdit::Create { name, members } => {
                if members.is_empty() {
                    return Err(Error::InvalidAction("a new bucket needs at least one member".into()));
                }
                let name = self.checked_name(name, &[])?;
                let mut set = BTreeSet::new();
                for m in members {
                    self.take_member(m)?;
                    set.insert(m.clone());
                }
                let bucket_id = self.fresh_id();
                self.buckets.push(Bucket {
                    bucket_id,
                    name,
                    members: set,
                });
            }
            BucketEdit::Rename { bucket_id, name } => {
                let i = self.position(bucket_id)?;
                self.buckets[i].name = self.checked_name(name, &[bucket_id])?;
            }
            BucketEdit::Delete { bucket_id, destination } => {
                let i = self.position(bucket_id)?;
                match destination {
                    None if !self.buckets[i].members.is_empty() => {
                        return Err(Error::InvalidAction(format!(
                            "bucket {bucket_id} still has members; name a destination"
                        )))
                    }
                    None => {}
                    Some(d) if d == bucket_id => {
                        return Err(Error::InvalidAction("destination is the bucket being deleted".into()))
                    }
                    Some(d) => {
                        let j = self.position(d)?;
                        let moved = std::mem::take(&mut self.buckets[i].members);
                        self.buckets[j].members.extend(moved);
                    }
                }
                self.buckets.remove(i);
            }
            BucketEdit::Merge { bucket_ids, name } => {
                let distinct: BTreeSet<&String> = bucket_ids.iter().collect();
                if bucket_ids.len() < 2 || distinct.len() != bucket_ids.len() {
                    return Err(Error::InvalidAction("merge needs two or more distinct buckets".into()));
                }
                let positions = bucket_ids.iter().map(|id| self.position(id)).collect::<Result<Vec<_>>>()?;
                let keep = positions[0];
                if let Some(n) = name {
                    let skip: Vec<&str> = bucket_ids.iter().map(String::as_str).collect();
                    self.buckets[keep].name = self.checked_name(n, &skip)?;
                }
                for &p in &positions[1..] {
                    let moved = std::mem::take(&mut self.buckets[p].members);
                    self.buckets[keep].members.extend(moved);
                }
            }
        }
        self.drop_empty();
        Ok(())
    }

    /// Removes an item wherever it is; an emptied bucket disappears.
    pub(crate) fn remove_item(&mut self, item: &str) {
        for b in &mut self.buckets {
            b.members.remove(item);
        }
        self.drop_empty();
    }

    pub(crate) fn add_singleton(&mut self, item: &str, name: &str) {
        let name = unique_name(name, &self.names_except(&[]));
        let bucket_id = self.fresh_id();
        self.buckets.push(Bucket {
            bucket_id,
            name,
            members: BTreeSet::from([item.to_string()]),
        });
    }

    pub fn items(&self) -> BTreeSet<String> {
        self.buckets.iter().flat_map(|b| b.members.iter().cloned()).collect()
    }

    pub fn groups(&self) -> Vec<Vec<String>> {
        self.buckets.iter().map(|b| b.members.iter().cloned().collect()).collect()
    }

    /// Every item of `universe` in exactly one non-empty bucket, nothing
    /// else, unique ids and case-insensitively unique names.
    pub fn check_partition(&self, universe: &BTreeSet<String>) -> Result<()> {
        let mut seen = BTreeSet::new();
        let mut names = BTreeSet::new();
        let mut ids = BTreeSet::new();
        for b in &self.buckets {
            if b.members.is_empty() {
                return Err(Error::Corrupt(format!("bucket {} is empty", b.bucket_id)));
            }
            if !ids.insert(&b.bucket_id) {
                return Err(Error::Corrupt(format!("bucket id {} repeated", b.bucket_id)));
            }
            if !names.insert(label_key(&b.name)) {
                return Err(Error::Corrupt(format!("bucket name {:?} repeated", b.name)));
            }
            for m in &b.members {
                if !universe.contains(m) {
                    return Err(Error::Corrupt(format!("bucket {} holds unknown item {m}", b.bucket_id)));
                }
                if !seen.insert(m) {
                    return Err(Error::Corrupt(format!("item {m} in more than one bucket")));
                }
            }
        }
        if seen.len() != universe.len() {
            let missing: Vec<_> = universe.iter().filter(|u| !seen.contains(u)).take(5).collect();
            return Err(Error::Corrupt(format!("items not in any bucket: {missing:?}")));
        }
        Ok(())
    }
}
