//! Embedded store: one canonical JSON document per client record, plus a
//! small namespaced document area for configuration and generated output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::entry::{Entry, EntryFilter};
use super::load::{check_record_id, seq_floor, serialize, validate_and_load, validate_entry, validate_record};
use super::types::{ClientRecord, ReadingStatus, TherapyGoal};
use super::RecordError;

/// Per-record slot. Readers clone the `Arc` snapshot; writers queue on
/// `write` so that no update is lost.
#[derive(Debug)]
struct Slot {
    write: Mutex<()>,
    current: RwLock<Arc<ClientRecord>>,
}

#[derive(Debug, Default)]
pub struct RecordStore {
    root: Option<PathBuf>,
    records: RwLock<BTreeMap<String, Arc<Slot>>>,
    documents: RwLock<BTreeMap<(String, String), serde_json::Value>>,
}

impl RecordStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a store rooted at `root`, loading every
    /// record and document found there.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, RecordError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("records"))?;
        fs::create_dir_all(root.join("documents"))?;

        let mut records = BTreeMap::new();
        for file in json_files(&root.join("records"))? {
            let text = fs::read_to_string(&file)?;
            let record = validate_and_load(&text).map_err(|e| RecordError::Corrupt {
                file: file.display().to_string(),
                source: Box::new(e),
            })?;
            records.insert(record.record_id.clone(), Arc::new(Slot::new(record)));
        }

        let mut documents = BTreeMap::new();
        for ns_dir in fs::read_dir(root.join("documents"))? {
            let ns_dir = ns_dir?.path();
            if !ns_dir.is_dir() {
                continue;
            }
            let namespace = file_stem(&ns_dir);
            for file in json_files(&ns_dir)? {
                let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&file)?)
                    .map_err(|e| RecordError::Corrupt {
                        file: file.display().to_string(),
                        source: Box::new(RecordError::Schema { path: String::new(), message: e.to_string() }),
                    })?;
                documents.insert((namespace.clone(), file_stem(&file)), value);
            }
        }

        Ok(Self { root: Some(root), records: RwLock::new(records), documents: RwLock::new(documents) })
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn record_ids(&self) -> Vec<String> {
        self.records.read().expect("store lock").keys().cloned().collect()
    }

    pub fn contains(&self, record_id: &str) -> bool {
        self.records.read().expect("store lock").contains_key(record_id)
    }

    /// Adds a new record. Fails if the id is taken.
    pub fn create(&self, record: ClientRecord) -> Result<(), RecordError> {
        let record = normalize(record)?;
        let mut records = self.records.write().expect("store lock");
        if records.contains_key(&record.record_id) {
            return Err(RecordError::AlreadyExists(record.record_id));
        }
        self.persist(&record)?;
        records.insert(record.record_id.clone(), Arc::new(Slot::new(record)));
        Ok(())
    }

    /// Adds or fully replaces a record (used for seeding fixtures).
    pub fn put(&self, record: ClientRecord) -> Result<(), RecordError> {
        let record = normalize(record)?;
        let existing = self.records.read().expect("store lock").get(&record.record_id).cloned();
        match existing {
            Some(slot) => {
                let _queue = slot.write.lock().expect("record write lock");
                self.persist(&record)?;
                *slot.current.write().expect("record lock") = Arc::new(record);
            }
            None => {
                let mut records = self.records.write().expect("store lock");
                self.persist(&record)?;
                records.insert(record.record_id.clone(), Arc::new(Slot::new(record)));
            }
        }
        Ok(())
    }

    /// Immutable snapshot of the record's current state.
    pub fn snapshot(&self, record_id: &str) -> Result<Arc<ClientRecord>, RecordError> {
        let slot = self.slot(record_id)?;
        let current = slot.current.read().expect("record lock");
        Ok(Arc::clone(&current))
    }

    /// Validates and stores a new entry, assigning it a fresh entry id.
    pub fn ingest_entry(&self, record_id: &str, mut entry: Entry) -> Result<String, RecordError> {
        if !entry.entry_id().is_empty() {
            return Err(RecordError::Validation {
                path: "entry_id".into(),
                message: "entry ids are assigned by the store".into(),
            });
        }
        validate_entry("entry", &entry)?;
        self.mutate(record_id, move |record| {
            let prefix = entry.kind().id_prefix();
            let id = loop {
                let candidate = format!("{prefix}-{:06}", record.next_entry_seq);
                record.next_entry_seq += 1;
                if record.find(&candidate).is_none() {
                    break candidate;
                }
            };
            entry.set_entry_id(id.clone());
            record.insert_sorted(entry);
            Ok(id)
        })
    }

    /// Entries matching `filter`, ascending by timestamp.
    pub fn list_entries(&self, record_id: &str, filter: &EntryFilter) -> Result<Vec<Entry>, RecordError> {
        let record = self.snapshot(record_id)?;
        Ok(record.filtered(filter).iter().filter_map(|e| e.to_owned_entry()).collect())
    }

    /// Replaces the content of an existing entry, keeping its id.
    pub fn update_entry(&self, record_id: &str, entry_id: &str, mut entry: Entry) -> Result<(), RecordError> {
        validate_entry("entry", &entry)?;
        let entry_id = entry_id.to_string();
        self.mutate(record_id, move |record| {
            let old = record
                .remove(&entry_id)
                .ok_or_else(|| RecordError::UnknownEntry(entry_id.clone()))?;
            if old.kind() != entry.kind() {
                return Err(RecordError::Validation {
                    path: "kind".into(),
                    message: format!("cannot change `{entry_id}` from {} to {}", old.kind(), entry.kind()),
                });
            }
            entry.set_entry_id(entry_id);
            record.insert_sorted(entry);
            Ok(())
        })
    }

    pub fn remove_entry(&self, record_id: &str, entry_id: &str) -> Result<Entry, RecordError> {
        let entry_id = entry_id.to_string();
        self.mutate(record_id, move |record| {
            record.remove(&entry_id).ok_or(RecordError::UnknownEntry(entry_id))
        })
    }

    pub fn set_reading_materials(&self, record_id: &str, reading: ReadingStatus) -> Result<(), RecordError> {
        self.mutate(record_id, move |record| {
            record.reading_materials = reading;
            Ok(())
        })
    }

    /// Replaces the goal list. Goals without an id are assigned one; goals
    /// with an id must already exist.
    pub fn replace_goals(&self, record_id: &str, goals: Vec<TherapyGoal>) -> Result<Vec<TherapyGoal>, RecordError> {
        for (i, goal) in goals.iter().enumerate() {
            validate_entry(&format!("goals[{i}]"), &Entry::Goal(goal.clone()))?;
        }
        self.mutate(record_id, move |record| {
            let existing: Vec<String> = record.goals.iter().map(|g| g.goal_id.clone()).collect();
            let mut next = Vec::with_capacity(goals.len());
            for mut goal in goals {
                if goal.goal_id.is_empty() {
                    loop {
                        let candidate = format!("goal-{:06}", record.next_entry_seq);
                        record.next_entry_seq += 1;
                        if record.find(&candidate).is_none() {
                            goal.goal_id = candidate;
                            break;
                        }
                    }
                } else if !existing.contains(&goal.goal_id) {
                    return Err(RecordError::UnknownEntry(goal.goal_id));
                }
                next.push(goal);
            }
            record.goals = next;
            record.sort_all();
            Ok(record.goals.clone())
        })
    }

    /// Stores a JSON document under `namespace/key`.
    pub fn put_document<T: Serialize>(&self, namespace: &str, key: &str, value: &T) -> Result<(), RecordError> {
        check_key(namespace)?;
        check_key(key)?;
        let value = serde_json::to_value(value).map_err(|e| RecordError::Schema {
            path: format!("{namespace}/{key}"),
            message: e.to_string(),
        })?;
        let mut docs = self.documents.write().expect("document lock");
        if let Some(root) = &self.root {
            let dir = root.join("documents").join(namespace);
            fs::create_dir_all(&dir)?;
            write_atomic(&dir.join(format!("{key}.json")), &serde_json::to_string_pretty(&value).expect("json value"))?;
        }
        docs.insert((namespace.to_string(), key.to_string()), value);
        Ok(())
    }

    pub fn get_document<T: DeserializeOwned>(&self, namespace: &str, key: &str) -> Result<Option<T>, RecordError> {
        let docs = self.documents.read().expect("document lock");
        match docs.get(&(namespace.to_string(), key.to_string())) {
            None => Ok(None),
            Some(value) => serde_json::from_value(value.clone()).map(Some).map_err(|e| RecordError::Schema {
                path: format!("{namespace}/{key}"),
                message: e.to_string(),
            }),
        }
    }

    /// Keys stored under `namespace`, in lexical order.
    pub fn document_keys(&self, namespace: &str) -> Vec<String> {
        let docs = self.documents.read().expect("document lock");
        docs.keys().filter(|(ns, _)| ns == namespace).map(|(_, k)| k.clone()).collect()
    }

    fn slot(&self, record_id: &str) -> Result<Arc<Slot>, RecordError> {
        self.records
            .read()
            .expect("store lock")
            .get(record_id)
            .cloned()
            .ok_or_else(|| RecordError::UnknownRecord(record_id.to_string()))
    }

    /// Applies `f` to a private copy of the record and publishes the result
    /// only if it still satisfies every record invariant.
    fn mutate<R>(
        &self,
        record_id: &str,
        f: impl FnOnce(&mut ClientRecord) -> Result<R, RecordError>,
    ) -> Result<R, RecordError> {
        let slot = self.slot(record_id)?;
        let _queue = slot.write.lock().expect("record write lock");
        let mut draft = ClientRecord::clone(&slot.current.read().expect("record lock"));
        let out = f(&mut draft)?;
        validate_record(&draft)?;
        self.persist(&draft)?;
        *slot.current.write().expect("record lock") = Arc::new(draft);
        Ok(out)
    }

    fn persist(&self, record: &ClientRecord) -> Result<(), RecordError> {
        if let Some(root) = &self.root {
            let path = root.join("records").join(format!("{}.json", record.record_id));
            write_atomic(&path, &serialize(record))?;
        }
        Ok(())
    }
}

impl Slot {
    fn new(record: ClientRecord) -> Self {
        Self { write: Mutex::new(()), current: RwLock::new(Arc::new(record)) }
    }
}

fn normalize(mut record: ClientRecord) -> Result<ClientRecord, RecordError> {
    validate_record(&record)?;
    record.sort_all();
    record.next_entry_seq = record.next_entry_seq.max(seq_floor(&record));
    Ok(record)
}

fn check_key(key: &str) -> Result<(), RecordError> {
    check_record_id(key).map_err(|_| RecordError::Schema {
        path: key.to_string(),
        message: "document keys must be 1-128 characters of [A-Za-z0-9_-]".into(),
    })
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, RecordError> {
    let mut out = Vec::new();
    for item in fs::read_dir(dir)? {
        let path = item?.path();
        if path.extension().is_some_and(|ext| ext == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), RecordError> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
