fn main() {
    std::process::exit(otfs_experiments::cli::run(std::env::args_os()));
}
