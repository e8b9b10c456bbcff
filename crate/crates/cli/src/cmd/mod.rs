pub mod evaluate;
pub mod ingest;
pub mod inspect;
pub mod simulate;
