use rustc_hash::FxHashMap;

use super::KgError;

/// Bijective name ↔ dense id maps for entities and relations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entities: Vec<String>,
    entity_ids: FxHashMap<String, u32>,
    relations: Vec<String>,
    relation_ids: FxHashMap<String, u32>,
}

fn intern(names: &mut Vec<String>, ids: &mut FxHashMap<String, u32>, name: &str) -> Result<u32, KgError> {
    if let Some(&id) = ids.get(name) {
        return Ok(id);
    }
    let id = u32::try_from(names.len()).map_err(|_| KgError::VocabularyOverflow(u32::MAX as u64))?;
    names.push(name.to_owned());
    ids.insert(name.to_owned(), id);
    Ok(id)
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Vocabulary with synthetic names `e0..`, `r0..`.
    pub fn anonymous(num_entities: usize, num_relations: usize) -> Self {
        let mut v = Vocabulary::new();
        for e in 0..num_entities {
            v.intern_entity(&format!("e{e}")).expect("fits in u32");
        }
        for r in 0..num_relations {
            v.intern_relation(&format!("r{r}")).expect("fits in u32");
        }
        v
    }

    pub fn intern_entity(&mut self, name: &str) -> Result<u32, KgError> {
        intern(&mut self.entities, &mut self.entity_ids, name)
    }

    pub fn intern_relation(&mut self, name: &str) -> Result<u32, KgError> {
        intern(&mut self.relations, &mut self.relation_ids, name)
    }

    pub fn entity_id(&self, name: &str) -> Option<u32> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<u32> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: u32) -> Option<&str> {
        self.entities.get(id as usize).map(String::as_str)
    }

    pub fn relation_name(&self, id: u32) -> Option<&str> {
        self.relations.get(id as usize).map(String::as_str)
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_contiguous_and_bijective() {
        let mut v = Vocabulary::new();
        assert_eq!(v.intern_entity("a").unwrap(), 0);
        assert_eq!(v.intern_entity("b").unwrap(), 1);
        assert_eq!(v.intern_entity("a").unwrap(), 0);
        assert_eq!(v.intern_relation("r").unwrap(), 0);
        assert_eq!(v.entity_name(1), Some("b"));
        assert_eq!(v.entity_id("b"), Some(1));
        assert_eq!(v.num_entities(), 2);
        assert_eq!(v.relation_name(3), None);
    }
}
