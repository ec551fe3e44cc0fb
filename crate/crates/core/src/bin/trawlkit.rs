fn main() {
    std::process::exit(trawlkit::cli::run(std::env::args_os()));
}
