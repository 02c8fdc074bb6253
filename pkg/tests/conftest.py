import pytest

from knowkit.model import KnowledgeBaseBuilder, Value, ValueKind


def build_vehicles_kb():
    """Small vehicles domain used across suites: a taxonomy with a default
    and an exception, part-whole links, and relation synonyms."""
    b = KnowledgeBaseBuilder()
    b.add_attribute("number-of-wheels", "Number of wheels", ValueKind.ordinal())
    b.add_attribute("max-speed", "Max speed", ValueKind.number(unit="mph"))
    b.add_attribute("fuel", "Fuel", ValueKind.categorical({"petrol", "diesel", "battery"}))
    b.add_relation("is-a", "is a")
    b.add_relation("has-part", "has part", synonyms=("includes",))
    b.add_relation("part-of", "part of", synonyms=("composed of",))
    b.add_relation("manufactures", "manufactures", synonyms=("makes",))
    b.add_concept("vehicle", "vehicle")
    b.add_concept("car", "car", synonyms=("automobile",), class_ids=("vehicle",),
                  attributes={"number-of-wheels": Value.ordinal(4)})
    b.add_concept("three-wheeler", "three-wheeler", class_ids=("car",),
                  attributes={"number-of-wheels": Value.ordinal(3)})
    b.add_concept("robin", "Reliant Robin", class_ids=("three-wheeler",))
    b.add_concept("sports-car", "sports car")
    b.add_concept("car-component", "car component")
    b.add_concept("engine", "engine", class_ids=("car-component",))
    b.add_concept("wheel", "wheel", class_ids=("car-component",))
    b.add_concept("organisation", "organisation")
    b.add_concept("manufacturer", "manufacturer", class_ids=("organisation",))
    b.add_concept("fiat", "Fiat", class_ids=("manufacturer",))
    b.add_concept("punto", "Punto", class_ids=("car",),
                  attributes={"fuel": Value.category("petrol")})
    b.add_relationship("car", "has-part", "engine")
    b.add_relationship("car", "has-part", "wheel")
    b.add_relationship("fiat", "manufactures", "punto")
    b.add_relationship("sports-car", "is-a", "car")
    return b.build()


def build_drinks_kb():
    """Two flat concepts with fully categorical attributes; structurally clean."""
    b = KnowledgeBaseBuilder()
    b.add_attribute("colour", "Colour",
                    ValueKind.categorical({"brown", "colourless", "red"}))
    b.add_attribute("cost", "Cost", ValueKind.categorical({"high", "medium", "low"}))
    b.add_attribute("serving-temperature", "Serving temperature",
                    ValueKind.categorical({"hot", "cold"}))
    b.add_attribute("transparency", "Transparency",
                    ValueKind.categorical({"opaque", "transparent"}))
    b.add_concept("liquid", "liquid")
    b.add_concept("coffee", "coffee", class_ids=("liquid",), attributes={
        "colour": Value.category("brown"),
        "cost": Value.category("medium"),
        "serving-temperature": Value.category("hot"),
        "transparency": Value.category("opaque"),
    })
    b.add_concept("vodka", "vodka", class_ids=("liquid",), attributes={
        "colour": Value.category("colourless"),
        "cost": Value.category("high"),
        "serving-temperature": Value.category("cold"),
        "transparency": Value.category("transparent"),
    })
    return b.build()


@pytest.fixture
def vehicles_kb():
    return build_vehicles_kb()


@pytest.fixture
def drinks_kb():
    return build_drinks_kb()
