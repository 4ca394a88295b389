fn main() { oodmap::cli::run(); }
