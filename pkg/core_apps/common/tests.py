import logging
import tempfile
from pathlib import Path

import numpy as np
import torch
from django.test import SimpleTestCase
from loguru import logger

from .logging import InterceptHandler, run_log
from .seeding import derive_seed, seed_everything


class SeedingTests(SimpleTestCase):
    def test_same_seed_same_draws(self):
        first = (seed_everything(5).integers(1000, size=4), torch.rand(3))
        second = (seed_everything(5).integers(1000, size=4), torch.rand(3))
        np.testing.assert_array_equal(first[0], second[0])
        self.assertTrue(torch.equal(first[1], second[1]))

    def test_derive_seed_is_stable(self):
        self.assertEqual(derive_seed("D", 3, "init"), derive_seed("D", 3, "init"))
        self.assertNotEqual(derive_seed("D", 3, "init"), derive_seed("D", 3, "v1_parser"))
        self.assertNotEqual(derive_seed("A", 13), derive_seed("A1", 3))
        self.assertLess(derive_seed("anything"), 2**31)


class RunLogTests(SimpleTestCase):
    def test_run_log_captures_stdlib_and_loguru(self):
        stdlib = logging.getLogger("core_apps.tests")
        stdlib.addHandler(InterceptHandler())
        self.addCleanup(stdlib.handlers.clear)
        stdlib.setLevel(logging.INFO)
        with tempfile.TemporaryDirectory() as tmp:
            with run_log(Path(tmp)):
                logger.info("from loguru")
                stdlib.warning("from logging")
            logger.info("after the run")
            text = (Path(tmp) / "run.log").read_text()
        self.assertIn("from loguru", text)
        self.assertIn("from logging", text)
        self.assertNotIn("after the run", text)
