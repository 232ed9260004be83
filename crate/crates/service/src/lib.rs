//! Crowdsourcing backend: workers report pairs of URLs whose pages are
//! translations of each other; the service fetches both pages politely,
//! extracts and scores parallel sentences, pays the worker and keeps the
//! resulting corpus.

pub mod api;
pub mod app;
pub mod client;
pub mod fetch;
pub mod model;
pub mod store;
pub mod testing;

pub use app::{CampaignSpec, Service, ServiceConfig, ServiceError};
pub use fetch::{Document, FetchError, Fetcher};
pub use model::{Campaign, GeneralLm, Id, LedgerEntry, Report, ReportStatus, StatsPoint, StoredPair};
pub use store::{Store, StoreError};
