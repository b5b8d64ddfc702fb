fn main() {
    std::process::exit(informledge::cli::run(std::env::args_os()));
}
