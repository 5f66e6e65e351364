//! Command-line front end of `topolat`.

pub mod modelfile;
pub mod record;
pub mod run;
