fn main() {
    std::process::exit(lsgcl::cli::run(std::env::args_os()));
}
