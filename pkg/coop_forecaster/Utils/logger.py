import logging
import os
from datetime import datetime


class Logger:
    _instance: 'Logger | None' = None

    def __new__(cls, log_file: str | None = None) -> 'Logger':
        if cls._instance is None:
            cls._instance = super(Logger, cls).__new__(cls)
            cls._instance._initialize(log_file)
        elif log_file and cls._instance.log_file is None:
            cls._instance._attach_file(log_file)
        return cls._instance

    def _initialize(self, log_file: str | None) -> None:
        self.log_file = None
        self.logger = logging.getLogger("CoopForecaster")
        self.logger.setLevel(logging.INFO)
        self.formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')

        if not self.logger.hasHandlers():
            console_handler = logging.StreamHandler()
            console_handler.setFormatter(self.formatter)
            self.logger.addHandler(console_handler)

        if log_file:
            self._attach_file(log_file)
        self.logger.info("===== NEW SESSION STARTED =====")

    def _attach_file(self, log_file: str) -> None:
        self.log_file = log_file
        folder = os.path.dirname(log_file)
        if folder:
            os.makedirs(folder, exist_ok=True)
        self._write_start_header()
        file_handler = logging.FileHandler(self.log_file, mode='a')
        file_handler.setFormatter(self.formatter)
        self.logger.addHandler(file_handler)

    def _write_start_header(self) -> None:
        if not os.path.exists(self.log_file) or os.stat(self.log_file).st_size == 0:
            with open(self.log_file, 'a') as log:
                log.write(f"\n{'='*50}\n")
                log.write(f"LOG START - {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")
                log.write(f"{'='*50}\n\n")

    def log_event(self, message: str) -> None:
        self.logger.info(message)

    def log_warning(self, message: str) -> None:
        self.logger.warning(message)

    def log_error(self, message: str) -> None:
        self.logger.error(message)


def get_logger() -> Logger:
    return Logger()
