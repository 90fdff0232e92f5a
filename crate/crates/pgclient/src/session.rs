use postgres::error::SqlState;
use postgres::{Client, NoTls, SimpleQueryMessage};

use crate::{PgError, Session};

pub const DEFAULT_STATEMENT_TIMEOUT_MS: u64 = 300_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PasswordSource {
    None,
    /// Read from this environment variable at connect time.
    Env(String),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionSettings {
    pub host: String,
    pub port: u16,
    pub database: String,
    pub user: String,
    pub password: PasswordSource,
    pub statement_timeout_ms: u64,
}

impl Default for ConnectionSettings {
    fn default() -> Self {
        Self {
            host: "localhost".into(),
            port: 5432,
            database: "postgres".into(),
            user: "postgres".into(),
            password: PasswordSource::None,
            statement_timeout_ms: DEFAULT_STATEMENT_TIMEOUT_MS,
        }
    }
}

impl ConnectionSettings {
    /// Reads `Q2O_PG_HOST`, `Q2O_PG_PORT`, `Q2O_PG_DB`, `Q2O_PG_USER` and
    /// `Q2O_PG_PASSWORD`. Returns `Ok(None)` when none of them is set.
    pub fn from_env() -> Result<Option<Self>, PgError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Option<Self>, PgError> {
        let vars = [
            "Q2O_PG_HOST",
            "Q2O_PG_PORT",
            "Q2O_PG_DB",
            "Q2O_PG_USER",
            "Q2O_PG_PASSWORD",
        ];
        if vars.iter().all(|v| lookup(v).is_none()) {
            return Ok(None);
        }
        let mut s = Self::default();
        if let Some(host) = lookup("Q2O_PG_HOST") {
            s.host = host;
        }
        if let Some(port) = lookup("Q2O_PG_PORT") {
            s.port = parse_port(&port)?;
        }
        if let Some(db) = lookup("Q2O_PG_DB") {
            s.database = db;
        }
        if let Some(user) = lookup("Q2O_PG_USER") {
            s.user = user;
        }
        if lookup("Q2O_PG_PASSWORD").is_some() {
            s.password = PasswordSource::Env("Q2O_PG_PASSWORD".into());
        }
        Ok(Some(s))
    }

    fn password(&self) -> Option<String> {
        match &self.password {
            PasswordSource::None => None,
            PasswordSource::Env(var) => std::env::var(var).ok(),
            PasswordSource::Literal(p) => Some(p.clone()),
        }
    }
}

fn parse_port(text: &str) -> Result<u16, PgError> {
    match text.trim().parse::<u32>() {
        Ok(p) if (1..=65535).contains(&p) => Ok(p as u16),
        _ => Err(PgError::Settings(format!(
            "port `{text}` is not in [1, 65535]"
        ))),
    }
}

fn classify(e: postgres::Error) -> PgError {
    match e.code() {
        Some(code) if *code == SqlState::QUERY_CANCELED => PgError::Timeout,
        Some(code) if *code == SqlState::UNDEFINED_TABLE => PgError::NoSuchTable(e.to_string()),
        Some(_) => PgError::Sql(
            e.as_db_error()
                .map_or_else(|| e.to_string(), |d| d.message().to_string()),
        ),
        None if e.is_closed() => PgError::Connection(e.to_string()),
        None => PgError::Sql(e.to_string()),
    }
}

/// [`Session`] over a blocking `postgres` client.
pub struct PgSession {
    client: Client,
}

impl PgSession {
    /// Connects, sets `statement_timeout`, and tries to `LOAD 'pg_hint_plan'`
    /// (a server without the extension still connects; hints are then ignored).
    pub fn connect(settings: &ConnectionSettings) -> Result<Self, PgError> {
        let mut config = Client::configure();
        config
            .host(&settings.host)
            .port(settings.port)
            .dbname(&settings.database)
            .user(&settings.user);
        if let Some(p) = settings.password() {
            config.password(p);
        }
        let mut client = config
            .connect(NoTls)
            .map_err(|e| PgError::Connection(e.to_string()))?;
        client
            .batch_execute(&format!(
                "SET statement_timeout = {}",
                settings.statement_timeout_ms
            ))
            .map_err(classify)?;
        let _ = client.batch_execute("LOAD 'pg_hint_plan'");
        Ok(Self { client })
    }

    pub fn client(&mut self) -> &mut Client {
        &mut self.client
    }
}

impl Session for PgSession {
    fn query_text(&mut self, statement: &str) -> Result<String, PgError> {
        let messages = self.client.simple_query(statement).map_err(classify)?;
        let mut lines = Vec::new();
        for m in messages {
            if let SimpleQueryMessage::Row(row) = m {
                if let Some(cell) = row.get(0) {
                    lines.push(cell.to_string());
                }
            }
        }
        if lines.is_empty() {
            return Err(PgError::Parse("statement returned no rows".into()));
        }
        Ok(lines.join("\n"))
    }

    fn query_reltuples(&mut self, statement: &str, relname: &str) -> Result<Option<f64>, PgError> {
        let rows = self
            .client
            .query(statement, &[&relname])
            .map_err(classify)?;
        Ok(rows.first().map(|r| r.get::<_, f32>(0) as f64))
    }

    fn execute(&mut self, statement: &str) -> Result<(), PgError> {
        self.client
            .simple_query(statement)
            .map(|_| ())
            .map_err(classify)
    }
}
