import os
import sys
import subprocess
import argparse
import time
import logging
from datetime import datetime

from clt_transport.sweeps import bundled_sweeps

# Set up logging
log_dir = "logs"
if not os.path.exists(log_dir):
    os.makedirs(log_dir)

log_filename = os.path.join(log_dir, f'run_all_checks_{datetime.now().strftime("%Y%m%d_%H%M%S")}.log')
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(message)s",
    handlers=[
        logging.FileHandler(log_filename),
        logging.StreamHandler(sys.stdout)
    ]
)


def run_command(command):
    """Run a command and log its output line by line"""
    logging.info(f"Running command: {' '.join(command)}")
    try:
        process = subprocess.Popen(
            command,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            universal_newlines=True
        )
        for line in process.stdout:
            logging.info(line.rstrip())
        return_code = process.wait()

        if return_code != 0:
            logging.error(f"Command failed with return code {return_code}")
            return False

        return True
    except OSError as e:
        logging.error(f"Error running command: {str(e)}")
        return False


def run_all_checks(workers=None, output_dir=None, lock=False, with_tests=False):
    """Run every bundled sweep, the standalone checks and optionally the test suite"""
    start_time = time.time()
    cli = [sys.executable, "-m", "clt_transport.cli"]
    results = {}

    if with_tests:
        results["tests"] = run_command([sys.executable, "-m", "pytest", "clt_transport/tests", "-q"])

    for path in bundled_sweeps():
        command = cli + ["sweep", str(path)]
        if workers:
            command += ["--workers", str(workers)]
        if output_dir:
            command += ["--output-dir", output_dir]
        if lock:
            command.append("--lock")
        sweep_start = time.time()
        results[path.stem] = run_command(command)
        logging.info(f"Sweep {path.stem} finished in {time.time() - sweep_start:.2f} seconds")

    results["standalone"] = run_command(cli + ["check"])

    total_time = time.time() - start_time
    hours, remainder = divmod(total_time, 3600)
    minutes, seconds = divmod(remainder, 60)

    failed = [name for name, ok in results.items() if not ok]
    if failed:
        logging.error(f"Failed: {', '.join(failed)}")
    else:
        logging.info(f"All checks passed in {int(hours)}h {int(minutes)}m {int(seconds)}s")
    return not failed


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Run every acceptance sweep and check in sequence")
    parser.add_argument("--workers", type=int, help="Worker processes per sweep")
    parser.add_argument("--output-dir", type=str, help="Directory for the sweep reports")
    parser.add_argument("--lock", action="store_true", help="Lock the observed empirical constants")
    parser.add_argument("--with-tests", action="store_true", help="Run the pytest suite first")

    args = parser.parse_args()

    sys.exit(0 if run_all_checks(args.workers, args.output_dir, args.lock, args.with_tests) else 1)
