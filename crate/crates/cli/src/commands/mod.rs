pub mod control;
pub mod filter;
pub mod rde;
pub mod rough;
