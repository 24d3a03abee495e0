//! Expert profiles, questionnaire responses and distribution metadata.
//!
//! File formats (all UTF-8):
//!
//! * profiles: CSV `respondent_id,gender,designation,qualification,admin_experience,specialty,region`,
//!   with `admin_experience` as `;`-joined tokens;
//! * responses: long-form CSV `respondent_id,channel,mode,key,rating` (one rating per
//!   row) or the JSON equivalent read by [`parse_responses_json`];
//! * sent counts: JSON object `{"post": 50, "email": 21, "by_hand": 16}`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{fmt_percent, percent_hundredths, Finding, FindingKind, ValidationReport};
use crate::schema::{FuzzyScale, ItemId, QuestionnaireSchema};

fn normalize_token(token: &str) -> String {
    token
        .trim()
        .to_lowercase()
        .replace('.', "")
        .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            /// Case-, space- and punctuation-insensitive token lookup.
            pub fn from_token(token: &str) -> Option<Self> {
                match normalize_token(token).as_str() {
                    $($token $(| $alias)* => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

token_enum!(Gender {
    Male => "male" | "m",
    Female => "female" | "f",
    Unspecified => "unspecified" | "",
});

token_enum!(Designation {
    Professor => "professor" | "prof",
    AssociateProfessor => "associate_professor",
    AssistantProfessor => "assistant_professor",
    Lecturer => "lecturer",
    Other => "other",
});

token_enum!(Qualification {
    PostDoc => "post_doc" | "postdoc",
    Phd => "phd",
    Mphil => "mphil",
    Other => "other",
});

token_enum!(AdminRole {
    ViceChancellor => "vice_chancellor" | "vc",
    Dean => "dean",
    Chairman => "chairman",
    Director => "director",
});

token_enum!(Specialty {
    Education => "education",
    Hrm => "hrm" | "human_resource_management",
    Psychology => "psychology",
    ComputerScience => "computer_science",
    Statistics => "statistics",
    Other => "other",
});

token_enum!(Region {
    Federal => "federal",
    Sindh => "sindh",
    Punjab => "punjab",
    Nwfp => "nwfp",
    Balochistan => "balochistan",
    Other => "other",
});

token_enum!(
    /// How a questionnaire reached the expert.
    Channel {
        Post => "post" | "through_post",
        Email => "email" | "through_email" | "e_mail",
        ByHand => "by_hand" | "hand" | "byhand",
    }
);

impl Channel {
    /// Row heading used in the distribution table.
    pub fn heading(self) -> &'static str {
        match self {
            Channel::Post => "Through Post",
            Channel::Email => "Through Email",
            Channel::ByHand => "By hand",
        }
    }
}

/// Opaque respondent token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RespondentId(pub String);

impl RespondentId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RespondentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RespondentId {
    fn from(s: &str) -> Self {
        RespondentId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertProfile {
    pub respondent_id: RespondentId,
    pub gender: Gender,
    pub designation: Designation,
    pub qualification: Qualification,
    pub admin_experience: BTreeSet<AdminRole>,
    pub specialty: Specialty,
    pub region: Region,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedProfiles {
    pub profiles: Vec<ExpertProfile>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseMode {
    Item,
    Group,
}

impl ResponseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ResponseMode::Item => "item",
            ResponseMode::Group => "group",
        }
    }
}

/// A record's ratings: all per item or all per group, never mixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ratings {
    Item(BTreeMap<ItemId, u8>),
    Group(BTreeMap<u32, u8>),
}

impl Ratings {
    pub fn mode(&self) -> ResponseMode {
        match self {
            Ratings::Item(_) => ResponseMode::Item,
            Ratings::Group(_) => ResponseMode::Group,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Ratings::Item(m) => m.len(),
            Ratings::Group(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseRecord {
    pub respondent_id: RespondentId,
    pub channel: Channel,
    pub ratings: Ratings,
}

impl ResponseRecord {
    pub fn mode(&self) -> ResponseMode {
        self.ratings.mode()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResponseDataset {
    pub schema_version: u32,
    pub records: Vec<ResponseRecord>,
    pub profiles: BTreeMap<RespondentId, ExpertProfile>,
    /// Questionnaires distributed per channel.
    pub sent_counts: BTreeMap<Channel, u32>,
    /// Provenance notes added by transformations such as cohort filtering.
    pub notes: Vec<String>,
}

impl ResponseDataset {
    pub fn with_profiles(
        mut self,
        profiles: impl IntoIterator<Item = ExpertProfile>,
    ) -> Result<Self, IngestError> {
        for p in profiles {
            let id = p.respondent_id.clone();
            if self.profiles.insert(id.clone(), p).is_some() {
                return Err(IngestError::DuplicateRespondent { id, line: None });
            }
        }
        Ok(self)
    }

    pub fn with_sent_counts(mut self, sent: BTreeMap<Channel, u32>) -> Self {
        self.sent_counts = sent;
        self
    }

    pub fn received_counts(&self) -> BTreeMap<Channel, u32> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.channel).or_insert(0) += 1;
        }
        out
    }

    pub fn has_item_records(&self) -> bool {
        self.records.iter().any(|r| r.mode() == ResponseMode::Item)
    }
}

/// Whether missing ratings block downstream analytics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completeness {
    /// Missing ratings are errors.
    #[default]
    Strict,
    /// Missing ratings are warnings and get excluded per statistic.
    Lenient,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("unreadable JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: missing respondent_id")]
    MissingRespondentId { line: u64 },
    #[error("duplicate respondent_id {id}{}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    DuplicateRespondent { id: RespondentId, line: Option<u64> },
    #[error("{location}: unknown channel {value:?}")]
    UnknownChannel { location: String, value: String },
    #[error("{location}: unknown response mode {value:?} (expected item or group)")]
    UnknownMode { location: String, value: String },
    #[error("{location}: rating {value} for key {key} is outside 1..5")]
    RatingOutOfRange {
        location: String,
        key: String,
        value: String,
    },
    #[error("{location}: rating {value:?} for key {key} is not an integer")]
    InvalidRating {
        location: String,
        key: String,
        value: String,
    },
    #[error("{location}: key {key} is not in schema version {schema_version}")]
    UnknownKey {
        location: String,
        key: String,
        schema_version: u32,
    },
    #[error("{location}: respondent {respondent} mixes item-level and group-level ratings")]
    MixedModes {
        location: String,
        respondent: RespondentId,
    },
    #[error("{location}: respondent {respondent} appears with more than one channel")]
    InconsistentChannel {
        location: String,
        respondent: RespondentId,
    },
    #[error("{location}: respondent {respondent} rates {key} more than once")]
    DuplicateRating {
        location: String,
        respondent: RespondentId,
        key: String,
    },
    #[error("responses target schema version {found}, schema is version {expected}")]
    SchemaVersion { expected: u32, found: u32 },
    #[error("channel {channel}: {received} responses but no questionnaires sent")]
    ZeroSent { channel: Channel, received: u32 },
}

fn csv_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    IngestError::Csv {
        line,
        message: e.to_string(),
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| IngestError::Csv {
            line: 1,
            message: format!("missing column {name:?}"),
        })
}

fn reader(document: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(document.as_bytes())
}

/// Parses the expert-profile CSV. Unknown enum tokens become `other`
/// (`unspecified` for gender) and produce a warning.
pub fn parse_profiles(document: &str) -> Result<ParsedProfiles, IngestError> {
    let mut rdr = reader(document);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let [c_id, c_gender, c_desig, c_qual, c_admin, c_spec, c_region] = [
        "respondent_id",
        "gender",
        "designation",
        "qualification",
        "admin_experience",
        "specialty",
        "region",
    ]
    .map(|name| column(&headers, name));
    let (c_id, c_gender, c_desig, c_qual, c_admin, c_spec, c_region) = (
        c_id?, c_gender?, c_desig?, c_qual?, c_admin?, c_spec?, c_region?,
    );

    let mut out = ParsedProfiles::default();
    let mut seen = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = csv_line(&row);
        let field = |c: usize| row.get(c).unwrap_or("");
        let id = field(c_id);
        if id.is_empty() {
            return Err(IngestError::MissingRespondentId { line });
        }
        let id = RespondentId::from(id);
        if seen.insert(id.clone(), line).is_some() {
            return Err(IngestError::DuplicateRespondent {
                id,
                line: Some(line),
            });
        }

        let mut warn = |what: &str, value: &str, fallback: &str| {
            out.warnings.push(format!(
                "line {line}: unknown {what} {value:?} for {id}, using {fallback}"
            ));
        };
        let gender = Gender::from_token(field(c_gender)).unwrap_or_else(|| {
            warn("gender", field(c_gender), "unspecified");
            Gender::Unspecified
        });
        let designation = Designation::from_token(field(c_desig)).unwrap_or_else(|| {
            warn("designation", field(c_desig), "other");
            Designation::Other
        });
        let qualification = Qualification::from_token(field(c_qual)).unwrap_or_else(|| {
            warn("qualification", field(c_qual), "other");
            Qualification::Other
        });
        let specialty = Specialty::from_token(field(c_spec)).unwrap_or_else(|| {
            warn("specialty", field(c_spec), "other");
            Specialty::Other
        });
        let region = Region::from_token(field(c_region)).unwrap_or_else(|| {
            warn("region", field(c_region), "other");
            Region::Other
        });
        let mut admin_experience = BTreeSet::new();
        for token in field(c_admin)
            .split(';')
            .map(str::trim)
            .filter(|t| !t.is_empty())
        {
            match AdminRole::from_token(token) {
                Some(role) => {
                    admin_experience.insert(role);
                }
                None => warn("admin_experience", token, "nothing"),
            }
        }

        out.profiles.push(ExpertProfile {
            respondent_id: id,
            gender,
            designation,
            qualification,
            admin_experience,
            specialty,
            region,
        });
    }
    Ok(out)
}

// Incremental record assembly shared by the CSV and JSON readers.
struct RecordBuilder<'s> {
    schema: &'s QuestionnaireSchema,
    records: Vec<ResponseRecord>,
    index: HashMap<RespondentId, usize>,
}

impl<'s> RecordBuilder<'s> {
    fn new(schema: &'s QuestionnaireSchema) -> Self {
        Self {
            schema,
            records: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn record(
        &mut self,
        location: &str,
        id: RespondentId,
        channel: Channel,
        mode: ResponseMode,
    ) -> Result<&mut ResponseRecord, IngestError> {
        let idx = match self.index.get(&id) {
            Some(&i) => {
                let rec = &self.records[i];
                if rec.channel != channel {
                    return Err(IngestError::InconsistentChannel {
                        location: location.to_string(),
                        respondent: id,
                    });
                }
                if rec.mode() != mode {
                    return Err(IngestError::MixedModes {
                        location: location.to_string(),
                        respondent: id,
                    });
                }
                i
            }
            None => {
                let ratings = match mode {
                    ResponseMode::Item => Ratings::Item(BTreeMap::new()),
                    ResponseMode::Group => Ratings::Group(BTreeMap::new()),
                };
                self.records.push(ResponseRecord {
                    respondent_id: id.clone(),
                    channel,
                    ratings,
                });
                self.index.insert(id, self.records.len() - 1);
                self.records.len() - 1
            }
        };
        Ok(&mut self.records[idx])
    }

    fn add(
        &mut self,
        location: &str,
        id: RespondentId,
        channel: Channel,
        mode: ResponseMode,
        key: &str,
        rating: u8,
    ) -> Result<(), IngestError> {
        let schema_version = self.schema.version;
        let unknown = || IngestError::UnknownKey {
            location: location.to_string(),
            key: key.to_string(),
            schema_version,
        };
        let duplicate = |respondent: RespondentId| IngestError::DuplicateRating {
            location: location.to_string(),
            respondent,
            key: key.to_string(),
        };
        let schema = self.schema;
        match mode {
            ResponseMode::Item => {
                let item: ItemId = key.parse().map_err(|_| unknown())?;
                if schema.item(item).is_none() {
                    return Err(unknown());
                }
                let rec = self.record(location, id, channel, mode)?;
                if let Ratings::Item(m) = &mut rec.ratings {
                    if m.insert(item, rating).is_some() {
                        return Err(duplicate(rec.respondent_id.clone()));
                    }
                }
            }
            ResponseMode::Group => {
                let group: u32 = key.trim().parse().map_err(|_| unknown())?;
                if schema.group(group).is_none() {
                    return Err(unknown());
                }
                let rec = self.record(location, id, channel, mode)?;
                if let Ratings::Group(m) = &mut rec.ratings {
                    if m.insert(group, rating).is_some() {
                        return Err(duplicate(rec.respondent_id.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> ResponseDataset {
        ResponseDataset {
            schema_version: self.schema.version,
            records: self.records,
            ..Default::default()
        }
    }
}

fn parse_rating(location: &str, key: &str, raw: &str) -> Result<u8, IngestError> {
    let value: i64 = raw.trim().parse().map_err(|_| IngestError::InvalidRating {
        location: location.to_string(),
        key: key.to_string(),
        value: raw.to_string(),
    })?;
    match u8::try_from(value) {
        Ok(r) if FuzzyScale::contains(r) => Ok(r),
        _ => Err(IngestError::RatingOutOfRange {
            location: location.to_string(),
            key: key.to_string(),
            value: value.to_string(),
        }),
    }
}

fn parse_channel(location: &str, raw: &str) -> Result<Channel, IngestError> {
    Channel::from_token(raw).ok_or_else(|| IngestError::UnknownChannel {
        location: location.to_string(),
        value: raw.to_string(),
    })
}

fn parse_mode(location: &str, raw: &str) -> Result<ResponseMode, IngestError> {
    match normalize_token(raw).as_str() {
        "item" => Ok(ResponseMode::Item),
        "group" => Ok(ResponseMode::Group),
        _ => Err(IngestError::UnknownMode {
            location: location.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// Parses long-form response CSV against `schema`.
///
/// Records appear in order of each respondent's first row.
pub fn parse_responses(
    document: &str,
    schema: &QuestionnaireSchema,
) -> Result<ResponseDataset, IngestError> {
    let mut rdr = reader(document);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let c_id = column(&headers, "respondent_id")?;
    let c_channel = column(&headers, "channel")?;
    let c_mode = column(&headers, "mode")?;
    let c_key = column(&headers, "key")?;
    let c_rating = column(&headers, "rating")?;

    let mut builder = RecordBuilder::new(schema);
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = csv_line(&row);
        let location = format!("line {line}");
        let field = |c: usize| row.get(c).unwrap_or("");
        if field(c_id).is_empty() {
            return Err(IngestError::MissingRespondentId { line });
        }
        let channel = parse_channel(&location, field(c_channel))?;
        let mode = parse_mode(&location, field(c_mode))?;
        let key = field(c_key);
        let rating = parse_rating(&location, key, field(c_rating))?;
        builder.add(
            &location,
            RespondentId::from(field(c_id)),
            channel,
            mode,
            key,
            rating,
        )?;
    }
    Ok(builder.finish())
}

#[derive(Deserialize)]
struct ResponsesDocument {
    #[serde(default)]
    schema_version: Option<u32>,
    records: Vec<RecordDocument>,
}

#[derive(Deserialize)]
struct RecordDocument {
    respondent_id: String,
    channel: String,
    mode: String,
    ratings: BTreeMap<String, serde_json::Value>,
}

/// JSON form of the response file:
///
/// ```json
/// {"schema_version": 1,
///  "records": [{"respondent_id": "E01", "channel": "post", "mode": "group",
///               "ratings": {"1": 5, "2": 4}}]}
/// ```
pub fn parse_responses_json(
    document: &str,
    schema: &QuestionnaireSchema,
) -> Result<ResponseDataset, IngestError> {
    let doc: ResponsesDocument = serde_json::from_str(document).map_err(|e| IngestError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if let Some(found) = doc.schema_version {
        if found != schema.version {
            return Err(IngestError::SchemaVersion {
                expected: schema.version,
                found,
            });
        }
    }
    let mut builder = RecordBuilder::new(schema);
    for (i, rec) in doc.records.into_iter().enumerate() {
        let location = format!("records[{i}]");
        if rec.respondent_id.trim().is_empty() {
            return Err(IngestError::MissingRespondentId { line: 0 });
        }
        let id = RespondentId::from(rec.respondent_id.trim());
        if builder.index.contains_key(&id) {
            return Err(IngestError::DuplicateRespondent { id, line: None });
        }
        let channel = parse_channel(&location, &rec.channel)?;
        let mode = parse_mode(&location, &rec.mode)?;
        // An empty ratings object still yields a record.
        builder.record(&location, id.clone(), channel, mode)?;
        for (key, value) in rec.ratings {
            let raw = match &value {
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            let rating = parse_rating(&location, &key, &raw)?;
            builder.add(&location, id.clone(), channel, mode, &key, rating)?;
        }
    }
    Ok(builder.finish())
}

/// Parses `{"post": 50, "email": 21, "by_hand": 16}`.
pub fn parse_sent_counts(document: &str) -> Result<BTreeMap<Channel, u32>, IngestError> {
    let raw: BTreeMap<String, u32> =
        serde_json::from_str(document).map_err(|e| IngestError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    let mut out = BTreeMap::new();
    for (k, v) in raw {
        let channel = parse_channel("sent counts", &k)?;
        *out.entry(channel).or_insert(0) += v;
    }
    Ok(out)
}

/// Completeness, profile-join and distribution consistency findings.
///
/// Profile checks run only when the dataset carries profiles, and the
/// sent/received checks only when it carries sent counts.
pub fn validate_dataset(
    dataset: &ResponseDataset,
    schema: &QuestionnaireSchema,
    completeness: Completeness,
) -> ValidationReport {
    let mut report = ValidationReport::default();

    if dataset.schema_version != schema.version {
        report.push(Finding::error(
            FindingKind::SchemaVersionMismatch,
            "dataset",
            format!(
                "dataset targets schema version {}, schema is version {}",
                dataset.schema_version, schema.version
            ),
        ));
    }

    let missing = |location: String, message: String| match completeness {
        Completeness::Strict => Finding::error(FindingKind::MissingRating, location, message),
        Completeness::Lenient => Finding::warning(FindingKind::MissingRating, location, message),
    };
    for rec in &dataset.records {
        let location = format!("record {}", rec.respondent_id);
        match &rec.ratings {
            Ratings::Group(m) => {
                for g in schema.group_ids().filter(|g| !m.contains_key(g)) {
                    report.push(missing(
                        location.clone(),
                        format!("no rating for group {g}"),
                    ));
                }
            }
            Ratings::Item(m) => {
                for (_, item) in schema.items().filter(|(_, i)| !m.contains_key(&i.item_id)) {
                    report.push(missing(
                        location.clone(),
                        format!("no rating for item {}", item.item_id),
                    ));
                }
            }
        }
    }

    if !dataset.profiles.is_empty() {
        let responding: BTreeSet<&RespondentId> =
            dataset.records.iter().map(|r| &r.respondent_id).collect();
        for rec in &dataset.records {
            if !dataset.profiles.contains_key(&rec.respondent_id) {
                report.push(Finding::error(
                    FindingKind::MissingProfile,
                    format!("record {}", rec.respondent_id),
                    "respondent has no expert profile",
                ));
            }
        }
        for id in dataset
            .profiles
            .keys()
            .filter(|id| !responding.contains(id))
        {
            report.push(Finding::warning(
                FindingKind::OrphanProfile,
                format!("profile {id}"),
                "profile has no response record",
            ));
        }
    }

    if !dataset.sent_counts.is_empty() {
        for (channel, received) in dataset.received_counts() {
            match dataset.sent_counts.get(&channel) {
                None => report.push(Finding::error(
                    FindingKind::MissingSentCount,
                    format!("channel {channel}"),
                    format!("{received} responses but no sent count"),
                )),
                Some(&sent) if received > sent => report.push(Finding::error(
                    FindingKind::ReceivedExceedsSent,
                    format!("channel {channel}"),
                    format!("{received} responses exceed {sent} questionnaires sent"),
                )),
                Some(_) => {}
            }
        }
    }

    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DistributionRow {
    /// `None` on the totals row.
    pub channel: Option<Channel>,
    pub sent: u32,
    pub received: u32,
}

impl DistributionRow {
    /// Exact response rate in percent; `None` when nothing was sent.
    pub fn rate(&self) -> Option<f64> {
        (self.sent > 0).then(|| 100.0 * f64::from(self.received) / f64::from(self.sent))
    }

    /// Rate in integer hundredths of a percent, truncated (`28.73` → 2873).
    pub fn rate_hundredths(&self) -> Option<u64> {
        (self.sent > 0).then(|| percent_hundredths(self.received.into(), self.sent.into()))
    }

    pub fn rate_display(&self) -> String {
        if self.sent == 0 {
            "-".to_string()
        } else {
            fmt_percent(self.received.into(), self.sent.into())
        }
    }

    pub fn heading(&self) -> &'static str {
        self.channel.map(Channel::heading).unwrap_or("Total")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistributionSummary {
    pub rows: Vec<DistributionRow>,
    pub total: DistributionRow,
}

impl DistributionSummary {
    pub fn row(&self, channel: Channel) -> Option<&DistributionRow> {
        self.rows.iter().find(|r| r.channel == Some(channel))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<16}{:>20}{:>11}{:>9}\n",
            "Medium", "Questionnaire sent", "Responses", "%age"
        );
        for r in self.rows.iter().chain(std::iter::once(&self.total)) {
            out.push_str(&format!(
                "{:<16}{:>20}{:>11}{:>9}\n",
                r.heading(),
                r.sent,
                r.received,
                r.rate_display()
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("medium,sent,received,rate\n");
        for r in self.rows.iter().chain(std::iter::once(&self.total)) {
            let medium = r.channel.map(Channel::as_str).unwrap_or("total");
            out.push_str(&format!(
                "{medium},{},{},{}\n",
                r.sent,
                r.received,
                r.rate_display()
            ));
        }
        out
    }
}

/// Per-channel and total response rates. The total rate is recomputed from
/// the summed counts, never averaged from row rates.
pub fn distribution_summary(dataset: &ResponseDataset) -> Result<DistributionSummary, IngestError> {
    let received = dataset.received_counts();
    let mut rows = Vec::new();
    for &channel in Channel::ALL {
        let sent = dataset.sent_counts.get(&channel).copied();
        let got = received.get(&channel).copied();
        if sent.is_none() && got.is_none() {
            continue;
        }
        let (sent, got) = (sent.unwrap_or(0), got.unwrap_or(0));
        if sent == 0 && got > 0 {
            return Err(IngestError::ZeroSent {
                channel,
                received: got,
            });
        }
        rows.push(DistributionRow {
            channel: Some(channel),
            sent,
            received: got,
        });
    }
    let total = DistributionRow {
        channel: None,
        sent: rows.iter().map(|r| r.sent).sum(),
        received: rows.iter().map(|r| r.received).sum(),
    };
    Ok(DistributionSummary { rows, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::canonical_schema;

    const PROFILE_HEADER: &str =
        "respondent_id,gender,designation,qualification,admin_experience,specialty,region\n";

    fn group_csv(ids: &[&str], rating: u8, groups: u32, channel: &str) -> String {
        let mut s = String::from("respondent_id,channel,mode,key,rating\n");
        for id in ids {
            for g in 1..=groups {
                s.push_str(&format!("{id},{channel},group,{g},{rating}\n"));
            }
        }
        s
    }

    fn with_channels(sent: &[(Channel, u32)], received: &[(Channel, u32)]) -> ResponseDataset {
        let mut records = Vec::new();
        for &(channel, n) in received {
            for i in 0..n {
                records.push(ResponseRecord {
                    respondent_id: RespondentId(format!("{channel}-{i}")),
                    channel,
                    ratings: Ratings::Group(BTreeMap::new()),
                });
            }
        }
        ResponseDataset {
            schema_version: 1,
            records,
            ..Default::default()
        }
        .with_sent_counts(sent.iter().copied().collect())
    }

    #[test]
    fn token_lookup_is_lenient_about_spelling() {
        assert_eq!(
            Designation::from_token("Associate Professor"),
            Some(Designation::AssociateProfessor)
        );
        assert_eq!(
            Qualification::from_token("M.Phil"),
            Some(Qualification::Mphil)
        );
        assert_eq!(
            Qualification::from_token("Post-Doc"),
            Some(Qualification::PostDoc)
        );
        assert_eq!(
            Specialty::from_token("Human Resource Management"),
            Some(Specialty::Hrm)
        );
        assert_eq!(Channel::from_token("By hand"), Some(Channel::ByHand));
        assert_eq!(Region::from_token("KPK"), None);
    }

    #[test]
    fn profiles_parse_one_per_row() {
        let mut doc = PROFILE_HEADER.to_string();
        for i in 1..=25 {
            doc.push_str(&format!(
                "E{i:02},male,professor,phd,dean;director,education,punjab\n"
            ));
        }
        let parsed = parse_profiles(&doc).unwrap();
        assert_eq!(parsed.profiles.len(), 25);
        assert!(parsed.warnings.is_empty());
        assert_eq!(parsed.profiles[3].admin_experience.len(), 2);
    }

    #[test]
    fn duplicate_and_missing_profile_ids() {
        let doc = format!(
            "{PROFILE_HEADER}E07,male,professor,phd,,education,sindh\nE07,female,lecturer,mphil,,psychology,federal\n"
        );
        assert!(matches!(
            parse_profiles(&doc),
            Err(IngestError::DuplicateRespondent { line: Some(3), .. })
        ));
        let doc = format!("{PROFILE_HEADER},male,professor,phd,,education,sindh\n");
        assert!(matches!(
            parse_profiles(&doc),
            Err(IngestError::MissingRespondentId { line: 2 })
        ));
    }

    #[test]
    fn unknown_designation_falls_back_with_warning() {
        let doc =
            format!("{PROFILE_HEADER}E01,female,Reader,phd,chairman,statistics,balochistan\n");
        let parsed = parse_profiles(&doc).unwrap();
        assert_eq!(parsed.profiles[0].designation, Designation::Other);
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("Reader"));
    }

    #[test]
    fn group_level_responses() {
        let schema = canonical_schema();
        let ids: Vec<String> = (1..=25).map(|i| format!("E{i:02}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let ds = parse_responses(&group_csv(&refs, 4, 15, "post"), &schema).unwrap();
        assert_eq!(ds.records.len(), 25);
        assert!(ds.records.iter().all(|r| r.ratings.len() == 15));
        assert_eq!(ds.records[0].respondent_id.as_str(), "E01");
        assert!(validate_dataset(&ds, &schema, Completeness::Strict).is_empty());
    }

    #[test]
    fn rating_six_names_the_key() {
        let schema = canonical_schema();
        let doc = "respondent_id,channel,mode,key,rating\nE01,email,group,3,6\n";
        match parse_responses(doc, &schema) {
            Err(IngestError::RatingOutOfRange { key, value, .. }) => {
                assert_eq!(key, "3");
                assert_eq!(value, "6");
            }
            other => panic!("unexpected {other:?}"),
        }
        let doc = "respondent_id,channel,mode,key,rating\nE01,email,group,3,4.5\n";
        assert!(matches!(
            parse_responses(doc, &schema),
            Err(IngestError::InvalidRating { .. })
        ));
    }

    #[test]
    fn unknown_item_and_mixed_modes() {
        let schema = canonical_schema();
        let doc =
            "respondent_id,channel,mode,key,rating\nE01,post,item,2.13,4\nE01,post,item,2.14,4\n";
        match parse_responses(doc, &schema) {
            Err(IngestError::UnknownKey { key, .. }) => assert_eq!(key, "2.14"),
            other => panic!("unexpected {other:?}"),
        }
        let doc =
            "respondent_id,channel,mode,key,rating\nE01,post,item,1.1,4\nE01,post,group,2,4\n";
        assert!(matches!(
            parse_responses(doc, &schema),
            Err(IngestError::MixedModes { .. })
        ));
        let doc =
            "respondent_id,channel,mode,key,rating\nE01,post,group,1,4\nE01,email,group,2,4\n";
        assert!(matches!(
            parse_responses(doc, &schema),
            Err(IngestError::InconsistentChannel { .. })
        ));
        let doc = "respondent_id,channel,mode,key,rating\nE01,post,group,1,4\nE01,post,group,1,5\n";
        assert!(matches!(
            parse_responses(doc, &schema),
            Err(IngestError::DuplicateRating { .. })
        ));
    }

    #[test]
    fn json_responses_match_csv() {
        let schema = canonical_schema();
        let csv = "respondent_id,channel,mode,key,rating\nE01,post,group,1,5\nE01,post,group,2,4\nE02,by_hand,item,1.1,3\n";
        let json = r#"{"schema_version": 1, "records": [
            {"respondent_id": "E01", "channel": "post", "mode": "group", "ratings": {"1": 5, "2": 4}},
            {"respondent_id": "E02", "channel": "by_hand", "mode": "item", "ratings": {"1.1": 3}}]}"#;
        assert_eq!(
            parse_responses(csv, &schema).unwrap(),
            parse_responses_json(json, &schema).unwrap()
        );
        let stale = r#"{"schema_version": 2, "records": []}"#;
        assert!(matches!(
            parse_responses_json(stale, &schema),
            Err(IngestError::SchemaVersion { .. })
        ));
    }

    #[test]
    fn missing_group_rating_is_one_finding() {
        let schema = canonical_schema();
        let mut doc = group_csv(&["E01", "E02"], 5, 15, "email");
        doc = doc.replace("E02,email,group,15,5\n", "");
        let ds = parse_responses(&doc, &schema).unwrap();
        let strict = validate_dataset(&ds, &schema, Completeness::Strict);
        assert_eq!(strict.len(), 1);
        assert_eq!(strict.count(FindingKind::MissingRating), 1);
        assert!(!strict.passes());
        let lenient = validate_dataset(&ds, &schema, Completeness::Lenient);
        assert_eq!(lenient.len(), 1);
        assert!(lenient.passes());
    }

    #[test]
    fn received_over_sent_is_flagged() {
        let ds = with_channels(&[(Channel::Post, 50)], &[(Channel::Post, 60)]);
        let mut schema = canonical_schema();
        schema.groups.clear();
        let report = validate_dataset(&ds, &schema, Completeness::Strict);
        assert_eq!(report.len(), 1);
        assert_eq!(report.count(FindingKind::ReceivedExceedsSent), 1);
    }

    #[test]
    fn profile_join_findings() {
        let schema = canonical_schema();
        let ds = parse_responses(&group_csv(&["E01", "E02"], 4, 15, "post"), &schema).unwrap();
        let doc = format!(
            "{PROFILE_HEADER}E01,male,professor,phd,,education,sindh\nE09,male,professor,phd,,education,sindh\n"
        );
        let ds = ds
            .with_profiles(parse_profiles(&doc).unwrap().profiles)
            .unwrap();
        let report = validate_dataset(&ds, &schema, Completeness::Strict);
        assert_eq!(report.count(FindingKind::MissingProfile), 1);
        assert_eq!(report.count(FindingKind::OrphanProfile), 1);
        assert!(!report.passes());
    }

    #[test]
    fn table_two_rates() {
        let ds = with_channels(
            &[
                (Channel::Post, 50),
                (Channel::Email, 21),
                (Channel::ByHand, 16),
            ],
            &[
                (Channel::Post, 10),
                (Channel::Email, 6),
                (Channel::ByHand, 9),
            ],
        );
        let s = distribution_summary(&ds).unwrap();
        let shown: Vec<String> = s.rows.iter().map(|r| r.rate_display()).collect();
        assert_eq!(shown, ["20.00", "28.57", "56.25"]);
        assert_eq!((s.total.sent, s.total.received), (87, 25));
        assert_eq!(s.total.rate_display(), "28.73");
        assert!((s.total.rate().unwrap() - 2500.0 / 87.0).abs() < 1e-12);
    }

    #[test]
    fn rate_edges() {
        let s = distribution_summary(&with_channels(&[(Channel::Post, 10)], &[])).unwrap();
        assert_eq!(s.rows[0].rate_display(), "0.00");
        let s = distribution_summary(&with_channels(&[(Channel::Post, 7)], &[(Channel::Post, 7)]))
            .unwrap();
        assert_eq!(s.rows[0].rate_display(), "100.00");
        let err = distribution_summary(&with_channels(&[], &[(Channel::Email, 2)]));
        assert_eq!(
            err,
            Err(IngestError::ZeroSent {
                channel: Channel::Email,
                received: 2
            })
        );
    }

    #[test]
    fn sent_counts_json() {
        let sent = parse_sent_counts(r#"{"post": 50, "email": 21, "by_hand": 16}"#).unwrap();
        assert_eq!(sent[&Channel::ByHand], 16);
        assert!(parse_sent_counts(r#"{"pigeon": 3}"#).is_err());
    }
}
