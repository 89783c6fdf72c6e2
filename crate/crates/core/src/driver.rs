//! placeholder
pub struct EngineConfig;
pub enum EngineKind { General, RefutationallyComplete }
pub enum Verdict { Unknown }
pub fn verify() {}
