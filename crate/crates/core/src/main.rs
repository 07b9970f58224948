fn main() {
    std::process::exit(singular_elliptic::cli::run(std::env::args_os()));
}
