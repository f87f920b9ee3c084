fn main() {
    std::process::exit(leo_acq::cli::run(std::env::args_os()));
}
