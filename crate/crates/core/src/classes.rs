//! Object class labels.
//!
//! Detection files and label files carry class *names*; everything downstream
//! works with dense [`ClassId`]s handed out by a [`ClassMap`].

use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense index into a [`ClassMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassId(pub u16);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The KITTI object classes, in devkit order.
pub const KITTI_CLASSES: [&str; 8] = [
    "Car",
    "Van",
    "Truck",
    "Pedestrian",
    "Person_sitting",
    "Cyclist",
    "Tram",
    "Misc",
];

/// Ordered, case-insensitive mapping between class names and ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    names: Vec<String>,
}

impl Default for ClassMap {
    fn default() -> Self {
        Self::kitti()
    }
}

impl ClassMap {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = Self { names: Vec::new() };
        for name in names {
            let name = name.into();
            if map.id(&name).is_none() {
                map.names.push(name);
            }
        }
        map
    }

    pub fn kitti() -> Self {
        Self::new(KITTI_CLASSES)
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(name))
            .map(|i| ClassId(i as u16))
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.names.get(id.0 as usize).map(String::as_str)
    }

    pub fn contains(&self, id: ClassId) -> bool {
        (id.0 as usize) < self.names.len()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.names.len()).map(|i| ClassId(i as u16))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_case_insensitive() {
        let map = ClassMap::kitti();
        assert_eq!(map.id("car"), Some(ClassId(0)));
        assert_eq!(map.id("PEDESTRIAN"), Some(ClassId(3)));
        assert_eq!(map.name(ClassId(3)), Some("Pedestrian"));
        assert_eq!(map.id("DontCare"), None);
    }

    #[test]
    fn duplicates_are_collapsed() {
        let map = ClassMap::new(["Car", "car", "Pedestrian"]);
        assert_eq!(map.len(), 2);
        assert!(!map.contains(ClassId(2)));
    }
}
