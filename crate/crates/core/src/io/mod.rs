//! Input and output documents.

pub mod float;
mod result_doc;
mod system_doc;

pub use result_doc::{
    parse_document, CandidateDoc, CorrectorDoc, PredictorDoc, ResultDocument, RootDoc, RootsDocument, SettingsDoc,
    TraceDoc,
};
pub use system_doc::{Entry, SystemDocument};
