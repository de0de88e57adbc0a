from dotenv import load_dotenv
import logging
import os

from tensorcert.cli import main

load_dotenv()

logging.basicConfig(level=os.getenv("TENSOR_CERT_LOG_LEVEL", "INFO").upper())
logger = logging.getLogger(__name__)

if __name__ == '__main__':
    logger.debug("Starting tensorcert command line")
    main()
