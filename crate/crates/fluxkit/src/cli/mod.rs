//! Command-line entry point.

/// Run the CLI; returns the process exit code.
pub fn main() -> i32 {
    eprintln!("not yet wired");
    1
}
