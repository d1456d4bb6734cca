import random
from itertools import permutations

from django.test import SimpleTestCase

from .actions import Action, delinearize, linearize, salvage, truncate_at_root_close
from .exceptions import EmptyInput, MalformedSequence, MalformedTree, UnbalancedBrackets, UnknownSpan
from .tree import ParseTree, exact_match, parse_bracketed, serialize, top_intent

INTENTS = ["IN:GET_DIRECTIONS", "IN:GET_INFO_TRAFFIC", "IN:GET_EVENT", "IN:UNSUPPORTED_NAVIGATION"]
SLOTS = ["SL:DESTINATION", "SL:SOURCE", "SL:LOCATION", "SL:DATE_TIME", "SL:OBSTRUCTION"]


def random_tree(rng: random.Random) -> tuple[ParseTree, list[str]]:
    """A random valid tree over a fresh query whose tokens never repeat."""
    tokens: list[str] = []

    def filler():
        for _ in range(rng.randint(0, 2)):
            tokens.append(f"f{len(tokens)}")

    def intent(depth):
        children = [slot(depth) for _ in range(rng.randint(0, 3 if depth == 0 else 2))]
        return ParseTree.intent(rng.choice(INTENTS), *children)

    def slot(depth):
        label = rng.choice(SLOTS)
        if depth < 2 and rng.random() < 0.2:
            return ParseTree.slot(label, children=[intent(depth + 1)])
        filler()
        start = len(tokens)
        for _ in range(rng.randint(1, 3)):
            tokens.append(f"t{len(tokens)}")
        return ParseTree.slot(label, span=range(start, len(tokens)))

    filler()
    tree = intent(0)
    filler()
    return tree, tokens


ROUTE_QUERY = "Which route to work has less traffic ?".split()


class ParseBracketedTests(SimpleTestCase):
    def test_root_only_unsupported(self):
        tree = parse_bracketed("(IN:UNSUPPORTED_NAVIGATION )", ["anything"])
        self.assertTrue(tree.is_intent)
        self.assertEqual(tree.label, "IN:UNSUPPORTED_NAVIGATION")
        self.assertEqual(tree.children, ())

    def test_slot_resolves_to_token_index(self):
        tree = parse_bracketed('(IN:GET_DIRECTIONS (SL:DESTINATION "work" ) )', ROUTE_QUERY)
        self.assertEqual(tree.children, (ParseTree.slot("SL:DESTINATION", span=[3]),))

    def test_multiword_span(self):
        query = "Where is there construction on the highway ?".split()
        tree = parse_bracketed('(IN:GET_INFO_ROAD_CONDITION (SL:LOCATION "the highway" ) )', query)
        self.assertEqual(tree.children[0].span, (5, 6))

    def test_ambiguous_span_takes_leftmost_after_previous_span(self):
        query = "from Boston to Boston".split()
        tree = parse_bracketed('(IN:GET_DIRECTIONS (SL:SOURCE "Boston" ) (SL:DESTINATION "Boston" ) )', query)
        self.assertEqual([child.span for child in tree.children], [(1,), (3,)])

    def test_nested_intent_under_slot(self):
        query = "take me to my brother 's house".split()
        text = '(IN:GET_DIRECTIONS (SL:DESTINATION (IN:GET_LOCATION_HOME (SL:CONTACT "my brother" ) ) ) )'
        tree = parse_bracketed(text, query)
        self.assertEqual(tree.children[0].children[0].children[0].span, (3, 4))
        self.assertEqual(serialize(tree, query), text)

    def test_errors(self):
        with self.assertRaises(EmptyInput):
            parse_bracketed("   ", ROUTE_QUERY)
        with self.assertRaises(UnbalancedBrackets):
            parse_bracketed('(IN:GET_DIRECTIONS (SL:DESTINATION "work" )', ROUTE_QUERY)
        with self.assertRaises(UnbalancedBrackets):
            parse_bracketed("(IN:GET_DIRECTIONS ) )", ROUTE_QUERY)
        with self.assertRaises(UnknownSpan):
            parse_bracketed('(IN:GET_DIRECTIONS (SL:DESTINATION "home" ) )', ROUTE_QUERY)
        with self.assertRaises(MalformedTree):
            parse_bracketed('(IN:GET_DIRECTIONS "work" )', ROUTE_QUERY)
        with self.assertRaises(MalformedTree):
            parse_bracketed("(SL:DESTINATION )", ROUTE_QUERY)


class SerializeTests(SimpleTestCase):
    def test_root_only(self):
        tree = ParseTree.intent("IN:UNSUPPORTED_NAVIGATION")
        self.assertEqual(serialize(tree, []), "(IN:UNSUPPORTED_NAVIGATION )")

    def test_slot_order_is_significant(self):
        a = ParseTree.slot("SL:DESTINATION", span=[3])
        b = ParseTree.slot("SL:OBSTRUCTION", span=[6])
        rendered = {serialize(ParseTree.intent("IN:GET_DIRECTIONS", *order), ROUTE_QUERY) for order in permutations([a, b])}
        self.assertEqual(len(rendered), 2)

    def test_round_trip_on_random_trees(self):
        rng = random.Random(0)
        for _ in range(10_000):
            tree, tokens = random_tree(rng)
            text = serialize(tree, tokens)
            parsed = parse_bracketed(text, tokens)
            self.assertEqual(parsed, tree)
            self.assertEqual(serialize(parsed, tokens), text)


class LinearizeTests(SimpleTestCase):
    def test_hand_traced_sequence(self):
        tree = parse_bracketed('(IN:GET_DIRECTIONS (SL:DESTINATION "work" ) )', ROUTE_QUERY)
        self.assertEqual(
            linearize(tree),
            (Action.open("IN:GET_DIRECTIONS"), Action.open("SL:DESTINATION"), Action.copy(3), Action.close(), Action.close()),
        )

    def test_root_only(self):
        self.assertEqual(linearize(ParseTree.intent("IN:X")), (Action.open("IN:X"), Action.close()))

    def test_length_identity_and_round_trip(self):
        rng = random.Random(1)
        for _ in range(10_000):
            tree, tokens = random_tree(rng)
            actions = linearize(tree)
            self.assertEqual(len(actions), 2 * tree.node_count() + len(tree.token_indices()))
            self.assertEqual(actions[0], Action.open(top_intent(tree)))
            self.assertEqual(delinearize(actions, tokens), tree)

    def test_unbalanced_is_rejected(self):
        with self.assertRaises(MalformedSequence):
            delinearize([Action.open("IN:X"), Action.close(), Action.close()], ["a"])
        with self.assertRaises(MalformedSequence):
            delinearize([Action.open("IN:X"), Action.open("SL:Y"), Action.copy(0)], ["a"])

    def test_copy_rules(self):
        with self.assertRaises(MalformedSequence):
            delinearize([Action.copy(0), Action.open("IN:X"), Action.close()], ["a"])
        with self.assertRaises(MalformedSequence):
            delinearize([Action.open("IN:X"), Action.open("SL:Y"), Action.copy(0), Action.copy(2), Action.close(),
                         Action.close()], ["a", "b", "c"])
        with self.assertRaises(MalformedSequence):
            delinearize([Action.open("IN:X"), Action.open("SL:Y"), Action.copy(5), Action.close(), Action.close()],
                        ["a"])
        with self.assertRaises(MalformedSequence):
            delinearize([Action.open("IN:X"), Action.copy(0), Action.close()], ["a"])

    def test_truncation_matches_bracket_counter(self):
        rng = random.Random(2)
        pool = [Action.open("IN:X"), Action.open("SL:Y"), Action.close(), Action.copy(0)]
        for _ in range(2_000):
            actions = [Action.open("IN:X")] + [rng.choice(pool) for _ in range(rng.randint(0, 12))]
            cut = truncate_at_root_close(actions)
            depth, expected = 0, len(actions)
            for position, action in enumerate(actions):
                depth += {"OPEN": 1, "CLOSE": -1}.get(action.kind.value, 0)
                if depth == 0:
                    expected = position + 1
                    break
            self.assertEqual(len(cut), expected)

    def test_salvage_recovers_what_it_can(self):
        tokens = ["a", "b", "c"]
        early_close = [Action.open("IN:X"), Action.close(), Action.open("SL:Y"), Action.close()]
        self.assertEqual(salvage(early_close, tokens), ParseTree.intent("IN:X"))
        unfinished = [Action.open("IN:X"), Action.open("SL:Y"), Action.copy(1)]
        self.assertEqual(salvage(unfinished, tokens), ParseTree.intent("IN:X", ParseTree.slot("SL:Y", span=[1])))
        self.assertIsNone(salvage([Action.copy(0)], tokens))
        self.assertIsNone(salvage([Action.open("SL:Y"), Action.copy(0), Action.close()], tokens))


class ExactMatchTests(SimpleTestCase):
    def test_relabeled_intent_keeps_slots(self):
        query = "Where is there construction on the highway ?".split()
        v1 = parse_bracketed('(IN:GET_INFO_ROAD_CONDITION (SL:LOCATION "the highway" ) )', query)
        v2 = parse_bracketed('(IN:GET_INFO_TRAFFIC (SL:LOCATION "the highway" ) )', query)
        self.assertTrue(exact_match(v2, parse_bracketed(serialize(v2, query), query)))
        self.assertFalse(exact_match(v1, v2))
        self.assertEqual(v1.children, v2.children)

    def test_agrees_with_canonical_strings(self):
        rng = random.Random(3)
        for _ in range(2_000):
            a, tokens = random_tree(rng)
            b = parse_bracketed(serialize(a, tokens), tokens) if rng.random() < 0.3 else random_tree(rng)[0]
            if b.token_indices() and max(b.token_indices()) >= len(tokens):
                continue
            self.assertEqual(exact_match(a, b), serialize(a, tokens) == serialize(b, tokens))

    def test_top_intent(self):
        query = "If I leave right now , can I get to New York City before one o'clock PM ?".split()
        tree = parse_bracketed(
            '(IN:GET_ESTIMATED_ARRIVAL (SL:DATE_TIME_DEPARTURE "right now" ) (SL:DESTINATION "New York City" ) )', query
        )
        self.assertEqual(top_intent(tree), "IN:GET_ESTIMATED_ARRIVAL")
        self.assertEqual(top_intent(ParseTree.intent("IN:X")), "IN:X")
