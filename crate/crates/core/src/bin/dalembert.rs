fn main() -> std::process::ExitCode {
    dalembert::cli::main()
}
