pub fn run() { std::process::exit(0); }
