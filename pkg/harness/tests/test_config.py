from django.conf import settings
from django.test import SimpleTestCase

from core.exceptions import ConfigError
from harness.services.config import CONFIG_KEYS, parse_config, parse_config_text, serialize_config
from memsim.services.tiers import Tier


class ParseConfigTests(SimpleTestCase):
    def test_empty_config_takes_defaults(self):
        config = parse_config_text("")
        self.assertEqual(config["gamma"], (10,))
        self.assertEqual(config["n_draft"], (4,))
        self.assertEqual(config["seeds"], tuple(range(20)))
        self.assertEqual(config["engines"], ("specmoe",))
        self.assertEqual(config.model.experts_per_block, 16)
        self.assertEqual(config.tier.device_capacity_bytes, 64 * config.model.bytes_per_expert)
        self.assertEqual(config.bandwidths, [64e9])

    def test_comments_lists_and_seed_ranges(self):
        config = parse_config_text(
            "# sweep\n"
            "n_draft = 2, 4, 8   # pinned experts\n"
            "\n"
            "seeds = 0-2, 7\n"
            "policy = random,hot_global\n"
        )
        self.assertEqual(config["n_draft"], (2, 4, 8))
        self.assertEqual(config["seeds"], (0, 1, 2, 7))
        self.assertEqual(config["policy"], ("random", "hot_global"))

    def test_gamma_zero_names_the_invariant_and_line(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("experts = 16\ngamma = 0\n")
        message = ctx.exception.messages[0]
        self.assertIn("γ ≥ 1", message)
        self.assertIn("line 2", message)
        self.assertEqual(ctx.exception.line, 2)

    def test_unknown_and_duplicate_keys(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("gamma = 5\n\nspeed = fast\n")
        self.assertEqual(ctx.exception.line, 3)
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("gamma = 5\ngamma = 6\n")
        self.assertEqual(ctx.exception.line, 2)

    def test_cross_field_invariants(self):
        for text in ("n_draft = 1\n", "n_draft = 17\n", "top_k = 20\n", "bandwidth = 0\n",
                     "offload_tier = ssd\n", "mode = sampling\ntemperature = 0\n",
                     "engines = caching\ncache_fraction = 1.5\n", "layers = 2\nmoe_layers = 3\n"):
            with self.subTest(text=text), self.assertRaises(ConfigError):
                parse_config_text(text)

    def test_capacity_below_draft_pins(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("device_capacity_bytes = 1000\n")
        self.assertIn("capacity", ctx.exception.messages[0])

    def test_ssd_tier(self):
        config = parse_config_text("offload_tier = ssd\nssd_bandwidth = 7e9\n")
        self.assertEqual(config.tier.offload_tier, Tier.SSD)
        self.assertEqual(config.bandwidths, [7e9])

    def test_serialize_round_trip(self):
        config = parse_config_text("gate_skew = 2.25\nbatch = 1, 8, 32\nverbose = true\nbandwidth = 16e9, 32e9\n")
        text = serialize_config(config)
        self.assertEqual([line.split(" = ")[0] for line in text.splitlines()], list(CONFIG_KEYS))
        self.assertEqual(parse_config_text(text), config)
        self.assertEqual(serialize_config(parse_config_text(text)), text)

    def test_overrides_are_revalidated(self):
        config = parse_config_text("gamma = 5\n")
        self.assertEqual(config.with_overrides(gamma="3, 4", seeds=None)["gamma"], (3, 4))
        with self.assertRaises(ConfigError):
            config.with_overrides(n_draft="1")

    def test_defaults_come_from_settings(self):
        with self.settings(MOELAB={**settings.MOELAB, "gamma": [6], "seeds": ["3"]}):
            config = parse_config_text("")
        self.assertEqual(config["gamma"], (6,))
        self.assertEqual(config["seeds"], (3,))

    def test_shipped_configs_parse(self):
        paths = sorted((settings.BASE_DIR / "configs").glob("*.conf"))
        self.assertTrue(paths)
        for path in paths:
            with self.subTest(path.name):
                self.assertTrue(parse_config(path)["seeds"])
