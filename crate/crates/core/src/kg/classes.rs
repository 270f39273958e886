use rustc_hash::FxHashMap;

/// Optional class per entity. Entities without an entry carry no class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassDict {
    entity_class: Vec<Option<u32>>,
    names: Vec<String>,
    ids: FxHashMap<String, u32>,
}

/// Counters collected while reading a class file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassLoadReport {
    /// Lines naming an entity absent from the vocabulary.
    pub unknown_entities: usize,
    /// Lines ignored because the entity already had a class.
    pub repeated_entities: usize,
}

impl ClassDict {
    pub fn new(num_entities: usize) -> Self {
        ClassDict {
            entity_class: vec![None; num_entities],
            ..Default::default()
        }
    }

    /// Build from a per-entity class id table; class names are synthesized.
    pub fn from_assignments(assignments: Vec<Option<u32>>) -> Self {
        let num_classes = assignments.iter().flatten().map(|&c| c as usize + 1).max().unwrap_or(0);
        let names: Vec<String> = (0..num_classes).map(|c| format!("c{c}")).collect();
        let ids = names.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
        ClassDict {
            entity_class: assignments,
            names,
            ids,
        }
    }

    pub fn intern_class(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    /// Assigns a class unless the entity already has one (first wins).
    /// Returns `false` when the assignment was ignored.
    pub fn assign(&mut self, entity: u32, class: u32) -> bool {
        let idx = entity as usize;
        if idx >= self.entity_class.len() {
            self.entity_class.resize(idx + 1, None);
        }
        match self.entity_class[idx] {
            Some(_) => false,
            None => {
                self.entity_class[idx] = Some(class);
                true
            }
        }
    }

    #[inline]
    pub fn class_of(&self, entity: u32) -> Option<u32> {
        self.entity_class.get(entity as usize).copied().flatten()
    }

    pub fn class_name(&self, class: u32) -> Option<&str> {
        self.names.get(class as usize).map(String::as_str)
    }

    pub fn class_id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn num_classes(&self) -> usize {
        self.names.len()
    }

    pub fn num_classified(&self) -> usize {
        self.entity_class.iter().filter(|c| c.is_some()).count()
    }
}
