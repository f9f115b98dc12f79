pub mod ambient;
pub mod biharmonic;
pub mod expr;
pub mod jet;
pub mod jetla;
pub mod numfmt;
pub mod oracle;
pub mod scenario;
pub mod structure;
pub mod submanifold;
