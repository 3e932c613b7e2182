fn main() {
    std::process::exit(kaccess::cli::run(std::env::args_os()));
}
