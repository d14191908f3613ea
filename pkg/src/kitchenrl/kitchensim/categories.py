"""Object categories, their static affordance flags, and containment rules."""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class Category(IntEnum):
    TOASTER = 0
    BREAD = 1
    BREAD_SLICED = 2
    KNIFE = 3
    CUP = 4
    SINK_BASIN = 5
    FAUCET = 6
    STOVE_BURNER = 7
    STOVE_KNOB = 8
    POT = 9
    PAN = 10
    POTATO = 11
    POTATO_SLICED = 12
    APPLE = 13
    APPLE_SLICED = 14
    PLATE = 15
    TOMATO = 16
    TOMATO_SLICED = 17
    LETTUCE = 18
    LETTUCE_SLICED = 19
    DINING_TABLE = 20
    COUNTER_TOP = 21
    FRIDGE = 22
    MICROWAVE = 23
    COFFEE_MACHINE = 24
    EGG = 25


NUM_CATEGORIES = len(Category)


@dataclass(frozen=True)
class CategoryFlags:
    pickupable: bool = False
    receptacle: bool = False
    openable: bool = False
    toggleable: bool = False
    sliceable: bool = False
    fillable: bool = False
    cookable: bool = False


FLAGS: dict[Category, CategoryFlags] = {
    Category.TOASTER: CategoryFlags(receptacle=True, toggleable=True),
    Category.BREAD: CategoryFlags(pickupable=True, sliceable=True, cookable=True),
    Category.BREAD_SLICED: CategoryFlags(pickupable=True, cookable=True),
    Category.KNIFE: CategoryFlags(pickupable=True),
    Category.CUP: CategoryFlags(pickupable=True, fillable=True),
    Category.SINK_BASIN: CategoryFlags(receptacle=True),
    Category.FAUCET: CategoryFlags(toggleable=True),
    Category.STOVE_BURNER: CategoryFlags(receptacle=True),
    Category.STOVE_KNOB: CategoryFlags(toggleable=True),
    Category.POT: CategoryFlags(pickupable=True, receptacle=True, fillable=True),
    Category.PAN: CategoryFlags(pickupable=True, receptacle=True),
    Category.POTATO: CategoryFlags(pickupable=True, sliceable=True, cookable=True),
    Category.POTATO_SLICED: CategoryFlags(pickupable=True, cookable=True),
    Category.APPLE: CategoryFlags(pickupable=True, sliceable=True),
    Category.APPLE_SLICED: CategoryFlags(pickupable=True),
    Category.PLATE: CategoryFlags(pickupable=True, receptacle=True),
    Category.TOMATO: CategoryFlags(pickupable=True, sliceable=True),
    Category.TOMATO_SLICED: CategoryFlags(pickupable=True),
    Category.LETTUCE: CategoryFlags(pickupable=True, sliceable=True),
    Category.LETTUCE_SLICED: CategoryFlags(pickupable=True),
    Category.DINING_TABLE: CategoryFlags(receptacle=True),
    Category.COUNTER_TOP: CategoryFlags(receptacle=True),
    Category.FRIDGE: CategoryFlags(receptacle=True, openable=True),
    Category.MICROWAVE: CategoryFlags(receptacle=True, openable=True, toggleable=True),
    Category.COFFEE_MACHINE: CategoryFlags(toggleable=True),
    Category.EGG: CategoryFlags(pickupable=True, cookable=True),
}

SLICED_VARIANT: dict[Category, Category] = {
    Category.BREAD: Category.BREAD_SLICED,
    Category.POTATO: Category.POTATO_SLICED,
    Category.APPLE: Category.APPLE_SLICED,
    Category.TOMATO: Category.TOMATO_SLICED,
    Category.LETTUCE: Category.LETTUCE_SLICED,
}

# receptacle -> exact allowed contents; tables/counters/fridge/microwave take
# anything pickupable instead (see can_contain)
_WHITELIST: dict[Category, frozenset[Category]] = {
    Category.PLATE: frozenset({Category.APPLE, Category.APPLE_SLICED,
                               Category.TOMATO_SLICED, Category.LETTUCE_SLICED}),
    Category.TOASTER: frozenset({Category.BREAD_SLICED}),
    Category.POT: frozenset({Category.POTATO, Category.POTATO_SLICED, Category.EGG}),
    Category.PAN: frozenset({Category.POTATO, Category.POTATO_SLICED, Category.EGG}),
    Category.SINK_BASIN: frozenset({Category.CUP, Category.POT, Category.PLATE}),
}

_ANY_PICKUPABLE = frozenset({
    Category.DINING_TABLE, Category.COUNTER_TOP,
    Category.FRIDGE, Category.MICROWAVE,
})


def can_contain(receptacle: Category, item: Category) -> bool:
    if receptacle in _ANY_PICKUPABLE:
        return FLAGS[item].pickupable
    return item in _WHITELIST.get(receptacle, frozenset())
