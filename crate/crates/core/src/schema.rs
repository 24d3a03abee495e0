//! The versioned questionnaire instrument.
//!
//! A [`QuestionnaireSchema`] is an ordered list of factor groups, each holding
//! rated items, plus the five-level fuzzy rating scale. Schemas evolve through
//! [`RevisionOp`]s; every applied batch bumps the version by one and is kept in
//! the revision log so a schema can be rebuilt from its base with
//! [`replay_revisions`].
//!
//! The built-in final instrument is available from [`canonical_schema`]. Its
//! items are numbered contiguously inside each group; the number printed in
//! the source questionnaire is kept in [`Item::printed_id`] (the printed
//! form skips "2.13" and repeats "15.4").

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::report::{Finding, FindingKind, ValidationReport};

const CANONICAL_SCHEMA_JSON: &str = include_str!("../data/canonical_schema.json");

pub const SCALE_MIN: u8 = 1;
pub const SCALE_MAX: u8 = 5;

/// Hierarchical item identifier `<group>.<ordinal>`, e.g. `1.7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId {
    pub group: u32,
    pub ordinal: u32,
}

impl ItemId {
    pub fn new(group: u32, ordinal: u32) -> Self {
        Self { group, ordinal }
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.group, self.ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid item id {0:?}, expected <group>.<ordinal>")]
pub struct ParseItemIdError(pub String);

impl FromStr for ItemId {
    type Err = ParseItemIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseItemIdError(s.to_string());
        let (g, o) = s.trim().split_once('.').ok_or_else(err)?;
        let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !digits(g) || !digits(o) {
            return Err(err());
        }
        let group = g.parse().map_err(|_| err())?;
        let ordinal = o.parse().map_err(|_| err())?;
        if group == 0 || ordinal == 0 {
            return Err(err());
        }
        Ok(ItemId { group, ordinal })
    }
}

impl Serialize for ItemId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ItemId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLevel {
    pub level: u8,
    pub label: String,
}

/// Five-anchor linguistic rating scale, stored in ascending level order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzyScale {
    pub levels: Vec<ScaleLevel>,
    pub description: Option<String>,
}

impl FuzzyScale {
    pub fn label(&self, level: u8) -> Option<&str> {
        self.levels
            .iter()
            .find(|l| l.level == level)
            .map(|l| l.label.as_str())
    }

    pub fn contains(level: u8) -> bool {
        (SCALE_MIN..=SCALE_MAX).contains(&level)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: ItemId,
    pub label: String,
    #[serde(default)]
    pub gloss: Option<String>,
    #[serde(default)]
    pub printed_id: Option<String>,
}

impl Item {
    pub fn new(item_id: ItemId, label: impl Into<String>) -> Self {
        Self {
            item_id,
            label: label.into(),
            gloss: None,
            printed_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGroup {
    pub group_id: u32,
    pub name: String,
    pub items: Vec<Item>,
}

/// One schema edit. Serialized with a `kind` tag, e.g.
/// `{"kind":"delete_item","target":"9.4"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RevisionOp {
    /// Appends `item` to the end of `group_id`. The item's id must be fresh.
    AddItem {
        group_id: u32,
        item: Item,
    },
    DeleteItem {
        target: ItemId,
    },
    /// Moves the item, keeping its id, to the end of `to_group`.
    MoveItem {
        target: ItemId,
        to_group: u32,
    },
    /// Replaces whichever texts are given.
    EditItem {
        target: ItemId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gloss: Option<String>,
    },
}

impl RevisionOp {
    pub fn target(&self) -> ItemId {
        match self {
            RevisionOp::AddItem { item, .. } => item.item_id,
            RevisionOp::DeleteItem { target }
            | RevisionOp::MoveItem { target, .. }
            | RevisionOp::EditItem { target, .. } => *target,
        }
    }
}

/// A revision together with the schema version it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionEntry {
    pub version: u32,
    #[serde(flatten)]
    pub op: RevisionOp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionnaireSchema {
    pub version: u32,
    pub scale: FuzzyScale,
    pub groups: Vec<FactorGroup>,
    pub revision_log: Vec<RevisionEntry>,
}

impl QuestionnaireSchema {
    pub fn item_count(&self) -> usize {
        self.groups.iter().map(|g| g.items.len()).sum()
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, group_id: u32) -> Option<&FactorGroup> {
        self.groups.iter().find(|g| g.group_id == group_id)
    }

    pub fn group_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.groups.iter().map(|g| g.group_id)
    }

    /// All items in schema order.
    pub fn items(&self) -> impl Iterator<Item = (&FactorGroup, &Item)> + '_ {
        self.groups
            .iter()
            .flat_map(|g| g.items.iter().map(move |i| (g, i)))
    }

    /// Group id that currently holds `id`.
    pub fn group_of(&self, id: ItemId) -> Option<u32> {
        self.locate(id).map(|(g, _)| self.groups[g].group_id)
    }

    pub fn item(&self, id: ItemId) -> Option<&Item> {
        self.locate(id).map(|(g, i)| &self.groups[g].items[i])
    }

    fn locate(&self, id: ItemId) -> Option<(usize, usize)> {
        self.groups.iter().enumerate().find_map(|(gi, g)| {
            g.items
                .iter()
                .position(|i| i.item_id == id)
                .map(|ii| (gi, ii))
        })
    }

    fn group_index(&self, group_id: u32) -> Option<usize> {
        self.groups.iter().position(|g| g.group_id == group_id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&SchemaDocument::from(self))
            .expect("schema document serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unreadable schema document at line {line}, column {column}: {message}")]
    Unreadable {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{location}: invalid item id {value:?}")]
    InvalidItemId { location: String, value: String },
    #[error("{location}: duplicate item id {id}")]
    DuplicateItemId { id: ItemId, location: String },
    #[error("{location}: group has no items")]
    EmptyGroup { location: String },
    #[error("{location}: malformed scale: {reason}")]
    MalformedScale { location: String, reason: String },
    #[error("{location}: {message}")]
    Invalid {
        kind: FindingKind,
        location: String,
        message: String,
    },
}

impl From<Finding> for SchemaError {
    fn from(f: Finding) -> Self {
        match f.kind {
            FindingKind::EmptyGroup => SchemaError::EmptyGroup {
                location: f.location,
            },
            FindingKind::ScaleLevelCount
            | FindingKind::ScaleLevelOrder
            | FindingKind::EmptyScaleLabel => SchemaError::MalformedScale {
                location: f.location,
                reason: f.message,
            },
            kind => SchemaError::Invalid {
                kind,
                location: f.location,
                message: f.message,
            },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RevisionError {
    #[error("revision {index}: target {id} does not exist")]
    UnknownTarget { index: usize, id: ItemId },
    #[error("revision {index}: item id {id} already exists")]
    DuplicateId { index: usize, id: ItemId },
    #[error("revision {index}: group {group_id} does not exist")]
    UnknownGroup { index: usize, group_id: u32 },
    #[error("revisions leave the schema invalid: {0}")]
    Invalid(Finding),
    #[error("revision log is not replayable: {0}")]
    Replay(String),
}

// Wire form of the schema file.
#[derive(Serialize, Deserialize)]
struct SchemaDocument {
    version: u32,
    scale: Vec<ScaleLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale_description: Option<String>,
    groups: Vec<GroupDocument>,
    #[serde(default)]
    revision_log: Vec<RevisionEntry>,
}

#[derive(Serialize, Deserialize)]
struct GroupDocument {
    group_id: u32,
    name: String,
    items: Vec<ItemDocument>,
}

#[derive(Serialize, Deserialize)]
struct ItemDocument {
    item_id: String,
    label: String,
    #[serde(default)]
    gloss: Option<String>,
    #[serde(default)]
    printed_id: Option<String>,
}

impl From<&QuestionnaireSchema> for SchemaDocument {
    fn from(s: &QuestionnaireSchema) -> Self {
        SchemaDocument {
            version: s.version,
            scale: s.scale.levels.clone(),
            scale_description: s.scale.description.clone(),
            groups: s
                .groups
                .iter()
                .map(|g| GroupDocument {
                    group_id: g.group_id,
                    name: g.name.clone(),
                    items: g
                        .items
                        .iter()
                        .map(|i| ItemDocument {
                            item_id: i.item_id.to_string(),
                            label: i.label.clone(),
                            gloss: i.gloss.clone(),
                            printed_id: i.printed_id.clone(),
                        })
                        .collect(),
                })
                .collect(),
            revision_log: s.revision_log.clone(),
        }
    }
}

/// Parses a JSON schema document and checks every schema invariant.
pub fn parse_schema(document: &str) -> Result<QuestionnaireSchema, SchemaError> {
    let schema = parse_schema_unchecked(document)?;
    let mut seen = HashSet::new();
    for (gi, g) in schema.groups.iter().enumerate() {
        for (ii, item) in g.items.iter().enumerate() {
            if !seen.insert(item.item_id) {
                return Err(SchemaError::DuplicateItemId {
                    id: item.item_id,
                    location: format!("groups[{gi}].items[{ii}]"),
                });
            }
        }
    }
    if let Some(first) = validate_schema(&schema).findings.into_iter().next() {
        return Err(first.into());
    }
    Ok(schema)
}

/// Reads the document structure only; pair with [`validate_schema`] to
/// collect every invariant violation instead of stopping at the first.
pub fn parse_schema_unchecked(document: &str) -> Result<QuestionnaireSchema, SchemaError> {
    let doc: SchemaDocument =
        serde_json::from_str(document).map_err(|e| SchemaError::Unreadable {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;

    let mut groups = Vec::with_capacity(doc.groups.len());
    for (gi, g) in doc.groups.into_iter().enumerate() {
        let mut items = Vec::with_capacity(g.items.len());
        for (ii, it) in g.items.into_iter().enumerate() {
            let item_id = it.item_id.parse().map_err(|_| SchemaError::InvalidItemId {
                location: format!("groups[{gi}].items[{ii}]"),
                value: it.item_id.clone(),
            })?;
            items.push(Item {
                item_id,
                label: it.label,
                gloss: it.gloss,
                printed_id: it.printed_id,
            });
        }
        groups.push(FactorGroup {
            group_id: g.group_id,
            name: g.name,
            items,
        });
    }
    Ok(QuestionnaireSchema {
        version: doc.version,
        scale: FuzzyScale {
            levels: doc.scale,
            description: doc.scale_description,
        },
        groups,
        revision_log: doc.revision_log,
    })
}

/// One finding per violated invariant; an empty report means the schema is valid.
pub fn validate_schema(schema: &QuestionnaireSchema) -> ValidationReport {
    let mut report = ValidationReport::default();

    let levels = &schema.scale.levels;
    if levels.len() != usize::from(SCALE_MAX) {
        report.push(Finding::error(
            FindingKind::ScaleLevelCount,
            "scale",
            format!("expected {SCALE_MAX} levels, found {}", levels.len()),
        ));
    } else if !levels
        .iter()
        .zip(SCALE_MIN..=SCALE_MAX)
        .all(|(l, want)| l.level == want)
    {
        let got: Vec<String> = levels.iter().map(|l| l.level.to_string()).collect();
        report.push(Finding::error(
            FindingKind::ScaleLevelOrder,
            "scale",
            format!("levels must be 1,2,3,4,5 in order, found {}", got.join(",")),
        ));
    }
    for (i, l) in levels.iter().enumerate() {
        if l.label.trim().is_empty() {
            report.push(Finding::error(
                FindingKind::EmptyScaleLabel,
                format!("scale[{i}]"),
                format!("level {} has an empty anchor label", l.level),
            ));
        }
    }

    let mut seen_groups = HashSet::new();
    for (gi, g) in schema.groups.iter().enumerate() {
        if !seen_groups.insert(g.group_id) {
            report.push(Finding::error(
                FindingKind::DuplicateGroupId,
                format!("groups[{gi}]"),
                format!("duplicate group id {}", g.group_id),
            ));
        }
    }
    let contiguous = schema
        .groups
        .iter()
        .zip(1u32..)
        .all(|(g, want)| g.group_id == want);
    if !contiguous {
        let ids: Vec<String> = schema.group_ids().map(|i| i.to_string()).collect();
        report.push(Finding::error(
            FindingKind::GroupContiguity,
            "groups",
            format!(
                "group ids must run 1..{} in order, found {}",
                schema.groups.len(),
                ids.join(",")
            ),
        ));
    }

    let mut seen_items = HashSet::new();
    for (gi, g) in schema.groups.iter().enumerate() {
        if g.items.is_empty() {
            report.push(Finding::error(
                FindingKind::EmptyGroup,
                format!("groups[{gi}]"),
                format!("group {} has no items", g.group_id),
            ));
        }
        for (ii, item) in g.items.iter().enumerate() {
            let location = format!("groups[{gi}].items[{ii}]");
            if !seen_items.insert(item.item_id) {
                report.push(Finding::error(
                    FindingKind::DuplicateItemId,
                    location.clone(),
                    format!("duplicate item id {}", item.item_id),
                ));
            }
            if item.label.trim().is_empty() {
                report.push(Finding::error(
                    FindingKind::EmptyItemLabel,
                    location,
                    format!("item {} has an empty label", item.item_id),
                ));
            }
        }
    }

    report
}

/// The built-in final 15-group, 99-item instrument.
pub fn canonical_schema() -> QuestionnaireSchema {
    static CANONICAL: OnceLock<QuestionnaireSchema> = OnceLock::new();
    CANONICAL
        .get_or_init(|| {
            parse_schema(CANONICAL_SCHEMA_JSON).expect("embedded canonical schema is valid")
        })
        .clone()
}

/// The embedded canonical schema document, byte for byte.
pub fn canonical_schema_json() -> &'static str {
    CANONICAL_SCHEMA_JSON
}

/// Applies `revisions` in order and returns the next schema version.
///
/// Application is all-or-nothing: the first failing revision aborts the batch,
/// and the result must satisfy every schema invariant.
pub fn apply_revisions(
    schema: &QuestionnaireSchema,
    revisions: &[RevisionOp],
) -> Result<QuestionnaireSchema, RevisionError> {
    let mut next = schema.clone();
    next.version += 1;

    for (index, op) in revisions.iter().enumerate() {
        match op {
            RevisionOp::AddItem { group_id, item } => {
                if next.locate(item.item_id).is_some() {
                    return Err(RevisionError::DuplicateId {
                        index,
                        id: item.item_id,
                    });
                }
                let gi = next
                    .group_index(*group_id)
                    .ok_or(RevisionError::UnknownGroup {
                        index,
                        group_id: *group_id,
                    })?;
                next.groups[gi].items.push(item.clone());
            }
            RevisionOp::DeleteItem { target } => {
                let (gi, ii) = next
                    .locate(*target)
                    .ok_or(RevisionError::UnknownTarget { index, id: *target })?;
                next.groups[gi].items.remove(ii);
            }
            RevisionOp::MoveItem { target, to_group } => {
                let (gi, ii) = next
                    .locate(*target)
                    .ok_or(RevisionError::UnknownTarget { index, id: *target })?;
                let dest = next
                    .group_index(*to_group)
                    .ok_or(RevisionError::UnknownGroup {
                        index,
                        group_id: *to_group,
                    })?;
                let item = next.groups[gi].items.remove(ii);
                next.groups[dest].items.push(item);
            }
            RevisionOp::EditItem {
                target,
                label,
                gloss,
            } => {
                let (gi, ii) = next
                    .locate(*target)
                    .ok_or(RevisionError::UnknownTarget { index, id: *target })?;
                let item = &mut next.groups[gi].items[ii];
                if let Some(label) = label {
                    item.label = label.clone();
                }
                if let Some(gloss) = gloss {
                    item.gloss = Some(gloss.clone());
                }
            }
        }
        next.revision_log.push(RevisionEntry {
            version: next.version,
            op: op.clone(),
        });
    }

    if let Some(first) = validate_schema(&next).findings.into_iter().next() {
        return Err(RevisionError::Invalid(first));
    }
    Ok(next)
}

/// Rebuilds a schema by re-applying a revision log, batch by batch, on `base`.
///
/// `replay_revisions(&draft, &revised.revision_log)` reproduces `revised`
/// when `draft` is the schema the log started from.
pub fn replay_revisions(
    base: &QuestionnaireSchema,
    log: &[RevisionEntry],
) -> Result<QuestionnaireSchema, RevisionError> {
    let already: BTreeSet<u32> = base.revision_log.iter().map(|e| e.version).collect();
    let mut current = base.clone();
    let mut rest = log
        .iter()
        .skip_while(|e| already.contains(&e.version))
        .peekable();

    while let Some(first) = rest.peek() {
        let version = first.version;
        if version <= current.version {
            return Err(RevisionError::Replay(format!(
                "entry for version {version} cannot follow schema version {}",
                current.version
            )));
        }
        // Batches that contained no operations leave no log entries.
        while current.version + 1 < version {
            current = apply_revisions(&current, &[])?;
        }
        let mut batch = Vec::new();
        while let Some(e) = rest.next_if(|e| e.version == version) {
            batch.push(e.op.clone());
        }
        current = apply_revisions(&current, &batch)?;
    }
    Ok(current)
}
