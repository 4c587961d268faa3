pub mod bench;
pub mod debugger;
pub mod engines;
pub mod interp;
pub mod lang;
pub mod par;
pub mod revgen;
