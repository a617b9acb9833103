use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::narray::NArray;
use crate::scalar::Real;

/// One named parameter with its optimizer state.
#[derive(Clone, Debug)]
pub struct Param<T> {
    pub value: NArray<T>,
    /// Adam first moment.
    pub m1: NArray<T>,
    /// Adam second moment.
    pub m2: NArray<T>,
    /// Number of optimizer steps applied to this parameter.
    pub step: u64,
}

impl<T: Real> Param<T> {
    pub fn new(value: NArray<T>) -> Self {
        let m1 = NArray::zeros(value.shape());
        let m2 = NArray::zeros(value.shape());
        Param {
            value,
            m1,
            m2,
            step: 0,
        }
    }
}

/// Named hierarchy of parameters. Names use `/`-separated segments
/// (e.g. `gen/stage0/conv/w`); iteration order is lexicographic, which keeps
/// serialization and update order deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParamTree<T> {
    entries: BTreeMap<String, Param<T>>,
}

impl<T: Real> ParamTree<T> {
    pub fn new() -> Self {
        ParamTree {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: NArray<T>) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::arg(format!("duplicate parameter '{name}'")));
        }
        self.entries.insert(name.to_string(), Param::new(value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Param<T>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::arg(format!("unknown parameter '{name}'")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param<T>> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::arg(format!("unknown parameter '{name}'")))
    }

    pub fn value(&self, name: &str) -> Result<&NArray<T>> {
        Ok(&self.get(name)?.value)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param<T>)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param<T>)> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn names_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a String> {
        self.entries.keys().filter(move |n| n.starts_with(prefix))
    }

    pub fn total_elements(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    /// Cast all values and optimizer state to another precision.
    pub fn cast<U: Real>(&self) -> ParamTree<U> {
        let entries = self
            .entries
            .iter()
            .map(|(k, p)| {
                (
                    k.clone(),
                    Param {
                        value: p.value.cast::<U>(),
                        m1: p.m1.cast::<U>(),
                        m2: p.m2.cast::<U>(),
                        step: p.step,
                    },
                )
            })
            .collect();
        ParamTree { entries }
    }
}
