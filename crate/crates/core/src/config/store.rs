use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex, Weak};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::queue::{BoundedQueue, DEFAULT_CAPACITY};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid parameter path `{0}`")]
    Path(String),
    #[error("type mismatch at {path}: expected {expected}")]
    Type { path: String, expected: &'static str },
    #[error("numeric parameter {0} needs a declaration with min/max")]
    Decl(String),
    #[error("invalid meta for {0}")]
    Meta(String),
    #[error("no parameter {0}")]
    NotFound(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// Absolute, slash separated, segments of `[a-z0-9_]+`. The root is `/`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ParamPath(String);

impl ParamPath {
    pub fn root() -> Self {
        ParamPath("/".into())
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        if s == "/" {
            return Ok(Self::root());
        }
        let valid_segment = |seg: &str| !seg.is_empty() && seg.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
        match s.strip_prefix('/') {
            Some(rest) if rest.split('/').all(valid_segment) => Ok(ParamPath(s.to_string())),
            _ => Err(ConfigError::Path(s.to_string())),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0 == "/"
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.0.split('/').filter(|s| !s.is_empty())
    }

    /// `self` equals `prefix` or lies below it.
    pub fn has_prefix(&self, prefix: &ParamPath) -> bool {
        prefix.is_root()
            || self.0 == prefix.0
            || (self.0.starts_with(&prefix.0) && self.0.as_bytes().get(prefix.0.len()) == Some(&b'/'))
    }
}

impl TryFrom<String> for ParamPath {
    type Error = ConfigError;
    fn try_from(s: String) -> Result<Self, ConfigError> {
        ParamPath::parse(&s)
    }
}

impl From<ParamPath> for String {
    fn from(p: ParamPath) -> String {
        p.0
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            ParamValue::Bool(_) => "bool",
            ParamValue::Int(_) => "int",
            ParamValue::Float(_) => "float",
            ParamValue::Str(_) => "string",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn from_json(v: &Value) -> Option<ParamValue> {
        match v {
            Value::Bool(b) => Some(ParamValue::Bool(*b)),
            Value::Number(n) => n.as_i64().map(ParamValue::Int).or_else(|| n.as_f64().map(ParamValue::Float)),
            Value::String(s) => Some(ParamValue::Str(s.clone())),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }

    /// Convert `self` to the type of `like`.
    fn coerce_to(&self, like: &ParamValue) -> Option<ParamValue> {
        match (like, self) {
            (ParamValue::Float(_), v) => v.as_f64().map(ParamValue::Float),
            (ParamValue::Int(_), ParamValue::Int(i)) => Some(ParamValue::Int(*i)),
            (ParamValue::Int(_), ParamValue::Float(f)) if f.fract() == 0.0 && f.abs() < 9.0e15 => Some(ParamValue::Int(*f as i64)),
            (ParamValue::Bool(_), ParamValue::Bool(b)) => Some(ParamValue::Bool(*b)),
            (ParamValue::Str(_), ParamValue::Str(s)) => Some(ParamValue::Str(s.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub default: f64,
}

impl Meta {
    pub fn new(min: f64, max: f64, step: f64, default: f64) -> Self {
        Meta { min, max, step, default }
    }

    fn valid(&self) -> bool {
        self.min <= self.default && self.default <= self.max && self.step >= 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub value: ParamValue,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub meta: Option<Meta>,
}

impl ParamEntry {
    fn clamped(&self, value: ParamValue) -> ParamValue {
        match (self.meta, value) {
            (Some(m), ParamValue::Float(v)) => ParamValue::Float(v.clamp(m.min, m.max)),
            (Some(m), ParamValue::Int(v)) => ParamValue::Int((v as f64).clamp(m.min, m.max).round() as i64),
            (_, v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub path: ParamPath,
    pub value: ParamValue,
    pub seq: u64,
}

struct Subscriber {
    prefix: ParamPath,
    queue: Weak<BoundedQueue<Notification>>,
}

struct State {
    entries: BTreeMap<ParamPath, ParamEntry>,
    seq: u64,
    subscribers: Vec<Subscriber>,
    /// Members of a loaded file that are not parameters, keyed by the JSON
    /// path of their parent object.
    extras: BTreeMap<Vec<String>, Map<String, Value>>,
}

/// Thread-safe hierarchical parameter store; clones share the same tree.
#[derive(Clone)]
pub struct ParamStore {
    state: Arc<Mutex<State>>,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

/// Receiving end of a subscription. Dropping it unsubscribes.
pub struct Subscription {
    pub prefix: ParamPath,
    queue: Arc<BoundedQueue<Notification>>,
}

impl Subscription {
    pub fn queue(&self) -> &Arc<BoundedQueue<Notification>> {
        &self.queue
    }

    pub fn try_recv(&self) -> Option<Notification> {
        self.queue.try_pop()
    }

    pub fn recv_timeout(&self, timeout: std::time::Duration) -> Option<Notification> {
        self.queue.pop_timeout(timeout)
    }

    pub fn drain(&self) -> Vec<Notification> {
        self.queue.drain()
    }

    pub fn take_lost(&self) -> bool {
        self.queue.take_lost()
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        self.queue.close();
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            state: Arc::new(Mutex::new(State { entries: BTreeMap::new(), seq: 0, subscribers: Vec::new(), extras: BTreeMap::new() })),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Declare a numeric parameter with its slider meta; keeps an existing value.
    pub fn declare_numeric(&self, path: &str, value: impl Into<ParamValue>, meta: Meta) -> Result<ParamValue, ConfigError> {
        let path = ParamPath::parse(path)?;
        if !meta.valid() {
            return Err(ConfigError::Meta(path.to_string()));
        }
        let value = value.into();
        if value.as_f64().is_none() {
            return Err(ConfigError::Type { path: path.to_string(), expected: "number" });
        }
        let mut st = self.lock();
        let entry = match st.entries.get(&path) {
            Some(old) => {
                let kept = old.value.coerce_to(&value).unwrap_or(value);
                let e = ParamEntry { value: kept, meta: Some(meta) };
                ParamEntry { value: e.clamped(e.value.clone()), ..e }
            }
            None => {
                let e = ParamEntry { value, meta: Some(meta) };
                ParamEntry { value: e.clamped(e.value.clone()), ..e }
            }
        };
        let v = entry.value.clone();
        st.entries.insert(path, entry);
        Ok(v)
    }

    pub fn declare(&self, path: &str, value: impl Into<ParamValue>) -> Result<ParamValue, ConfigError> {
        let path = ParamPath::parse(path)?;
        let value = value.into();
        if value.as_f64().is_some() {
            return Err(ConfigError::Decl(path.to_string()));
        }
        let mut st = self.lock();
        let v = st.entries.entry(path).or_insert(ParamEntry { value, meta: None }).value.clone();
        Ok(v)
    }

    /// Store a value, clamped to its range, and notify every matching
    /// subscription exactly once. Returns the committed value and its sequence number.
    pub fn set(&self, path: &str, value: impl Into<ParamValue>) -> Result<(ParamValue, u64), ConfigError> {
        let path = ParamPath::parse(path)?;
        if path.is_root() {
            return Err(ConfigError::Path(path.to_string()));
        }
        let value = value.into();
        let mut st = self.lock();
        let committed = match st.entries.get(&path) {
            Some(entry) => {
                let v = value
                    .coerce_to(&entry.value)
                    .ok_or(ConfigError::Type { path: path.to_string(), expected: entry.value.type_name() })?;
                entry.clamped(v)
            }
            None if value.as_f64().is_some() => return Err(ConfigError::Decl(path.to_string())),
            None => value,
        };
        st.entries
            .entry(path.clone())
            .and_modify(|e| e.value = committed.clone())
            .or_insert(ParamEntry { value: committed.clone(), meta: None });
        st.seq += 1;
        let seq = st.seq;
        st.subscribers.retain(|s| s.queue.strong_count() > 0);
        for s in &st.subscribers {
            if path.has_prefix(&s.prefix) {
                if let Some(q) = s.queue.upgrade() {
                    if !q.is_closed() {
                        q.push(Notification { path: path.clone(), value: committed.clone(), seq });
                    }
                }
            }
        }
        Ok((committed, seq))
    }

    pub fn get(&self, path: &str) -> Result<ParamValue, ConfigError> {
        let path = ParamPath::parse(path)?;
        self.lock().entries.get(&path).map(|e| e.value.clone()).ok_or(ConfigError::NotFound(path.to_string()))
    }

    pub fn get_f64(&self, path: &str) -> Option<f64> {
        self.get(path).ok().and_then(|v| v.as_f64())
    }

    pub fn entry(&self, path: &str) -> Result<ParamEntry, ConfigError> {
        let path = ParamPath::parse(path)?;
        self.lock().entries.get(&path).cloned().ok_or(ConfigError::NotFound(path.to_string()))
    }

    /// Entries at or below `prefix`, sorted by path.
    pub fn list(&self, prefix: &str) -> Result<Vec<(ParamPath, ParamEntry)>, ConfigError> {
        let prefix = ParamPath::parse(prefix)?;
        Ok(self.lock().entries.iter().filter(|(p, _)| p.has_prefix(&prefix)).map(|(p, e)| (p.clone(), e.clone())).collect())
    }

    pub fn values(&self) -> BTreeMap<ParamPath, ParamValue> {
        self.lock().entries.iter().map(|(p, e)| (p.clone(), e.value.clone())).collect()
    }

    pub fn seq(&self) -> u64 {
        self.lock().seq
    }

    pub fn subscribe(&self, prefix: &str) -> Result<Subscription, ConfigError> {
        self.subscribe_with_capacity(prefix, DEFAULT_CAPACITY)
    }

    pub fn subscribe_with_capacity(&self, prefix: &str, capacity: usize) -> Result<Subscription, ConfigError> {
        let prefix = ParamPath::parse(prefix)?;
        let queue = Arc::new(BoundedQueue::new(capacity));
        self.lock().subscribers.push(Subscriber { prefix: prefix.clone(), queue: Arc::downgrade(&queue) });
        Ok(Subscription { prefix, queue })
    }

    /// Canonical JSON document: sorted keys, one nested object per path segment.
    pub fn to_json(&self) -> String {
        let st = self.lock();
        let mut root = Map::new();
        for (path, entry) in &st.entries {
            let segs: Vec<&str> = path.segments().collect();
            let mut node = &mut root;
            for seg in &segs[..segs.len() - 1] {
                node = node
                    .entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Map::new()))
                    .as_object_mut()
                    .expect("groups are objects");
            }
            let mut leaf = Map::new();
            leaf.insert("value".into(), entry.value.to_json());
            if let Some(m) = entry.meta {
                leaf.insert("meta".into(), serde_json::to_value(m).unwrap_or(Value::Null));
            }
            node.insert(segs[segs.len() - 1].to_string(), Value::Object(leaf));
        }
        for (parent, extra) in &st.extras {
            if let Some(node) = descend(&mut root, parent) {
                for (k, v) in extra {
                    node.entry(k.clone()).or_insert(v.clone());
                }
            }
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(root)).unwrap_or_default();
        s.push('\n');
        s
    }

    pub fn save(&self, file: &Path) -> Result<(), ConfigError> {
        std::fs::write(file, self.to_json()).map_err(|e| ConfigError::Io(e.to_string()))
    }

    pub fn load(&self, file: &Path) -> Result<usize, ConfigError> {
        let text = std::fs::read_to_string(file).map_err(|e| ConfigError::Io(e.to_string()))?;
        self.load_json(&text)
    }

    /// Replay every parameter in `text` through [`set`](Self::set); numeric
    /// entries unknown to the store are declared from their meta. Returns the
    /// number of values applied.
    pub fn load_json(&self, text: &str) -> Result<usize, ConfigError> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| ConfigError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
        let Value::Object(root) = doc else {
            return Err(ConfigError::Parse { line: 1, column: 1, message: "top level must be an object".into() });
        };
        let mut leaves = Vec::new();
        let mut extras = BTreeMap::new();
        collect(&root, &mut Vec::new(), &mut leaves, &mut extras);
        for (path, leaf) in &leaves {
            let value = leaf.get("value").and_then(ParamValue::from_json).expect("collected leaves have scalar values");
            let meta = leaf.get("meta").and_then(|m| serde_json::from_value::<Meta>(m.clone()).ok());
            let known = self.lock().entries.contains_key(&ParamPath::parse(path)?);
            if !known {
                match meta {
                    Some(m) => {
                        let default = match value {
                            ParamValue::Int(_) => ParamValue::Int(m.default.round() as i64),
                            _ => ParamValue::Float(m.default),
                        };
                        self.declare_numeric(path, default, m)?;
                    }
                    None if value.as_f64().is_some() => return Err(ConfigError::Decl(path.clone())),
                    None => {}
                }
            }
            self.set(path, value)?;
        }
        self.lock().extras.extend(extras);
        Ok(leaves.len())
    }
}

fn descend<'a>(node: &'a mut Map<String, Value>, path: &[String]) -> Option<&'a mut Map<String, Value>> {
    match path.split_first() {
        None => Some(node),
        Some((seg, rest)) => {
            let child = node.entry(seg.clone()).or_insert_with(|| Value::Object(Map::new())).as_object_mut()?;
            descend(child, rest)
        }
    }
}

fn is_segment(k: &str) -> bool {
    !k.is_empty() && k.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn collect(
    node: &Map<String, Value>,
    prefix: &mut Vec<String>,
    leaves: &mut Vec<(String, Map<String, Value>)>,
    extras: &mut BTreeMap<Vec<String>, Map<String, Value>>,
) {
    for (k, v) in node {
        let leaf_value = v.as_object().and_then(|o| o.get("value")).filter(|x| ParamValue::from_json(x).is_some());
        match v {
            Value::Object(obj) if is_segment(k) && leaf_value.is_some() => {
                let path = format!("/{}", prefix.iter().chain(std::iter::once(k)).cloned().collect::<Vec<_>>().join("/"));
                let mut known = Map::new();
                let mut unknown = Map::new();
                for (field, x) in obj {
                    if field == "value" || field == "meta" {
                        known.insert(field.clone(), x.clone());
                    } else {
                        unknown.insert(field.clone(), x.clone());
                    }
                }
                if !unknown.is_empty() {
                    let mut at = prefix.clone();
                    at.push(k.clone());
                    extras.insert(at, unknown);
                }
                leaves.push((path, known));
            }
            Value::Object(obj) if is_segment(k) => {
                prefix.push(k.clone());
                collect(obj, prefix, leaves, extras);
                prefix.pop();
            }
            _ => {
                extras.entry(prefix.clone()).or_default().insert(k.clone(), v.clone());
            }
        }
    }
}
