fn main() {
    if let Err(e) = arcparse::cli::run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
