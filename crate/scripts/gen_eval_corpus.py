#!/usr/bin/env python3
"""Regenerate the 50-record synthetic evaluation corpus (deterministic).

Questions are templated over the bundled datasets; literals are read from
the data so every gold pipeline has a non-empty input.
"""
import csv
import json
import os
import random

HERE = os.path.dirname(__file__)
DATA = os.path.join(HERE, "..", "crates", "core", "data")
OUT = os.path.join(HERE, "..", "crates", "core", "resources", "eval_desk.jsonl")

# table -> (numerical columns, categorical columns, rows to draw literals from)
SHAPES = {
    "flights": (["distance", "dep_delay", "arr_delay", "passengers"], ["airline", "origin", "destination"]),
    "graduates": (["gpa", "starting_salary", "age"], ["major", "degree", "gender", "university"]),
    "vehicles": (["horsepower", "weight", "acceleration", "mpg", "cylinders"], ["make", "origin"]),
}


def rows(table):
    with open(os.path.join(DATA, table, f"{table}.csv")) as f:
        return list(csv.DictReader(f))


def human(col):
    return col.replace("_", " ")


def q(s):
    return "'" + s.replace("'", "''") + "'"


def num(v):
    x = float(v)
    return str(int(x)) if x == int(x) else str(x)


def records_for(table, rng, count):
    nums, cats = SHAPES[table]
    data = rows(table)
    out = []

    def value(col):
        return rng.choice([r[col] for r in data if r[col] != ""])

    def median_of(col):
        vs = sorted(float(r[col]) for r in data if r[col] != "")
        return num(vs[len(vs) // 2])

    templates = [
        lambda: (f"how many {table} are there?", f"SELECT[{q(table)}]; AGGREGATE[count, #1]"),
        lambda n=None: (
            lambda n: (f"what is the average {human(n)} of {table}?",
                       f"SELECT[{q(table)}]; PROJECT[{q(n)}, #1]; AGGREGATE[avg, #2]"))(rng.choice(nums)),
        lambda: (
            lambda n: (f"what is the highest {human(n)}?",
                       f"SELECT[{q(table)}]; PROJECT[{q(n)}, #1]; AGGREGATE[max, #2]"))(rng.choice(nums)),
        lambda: (
            lambda n: (f"list {table} sorted by {human(n)} descending",
                       f"SELECT[{q(table)}]; SORT[#1, {q(n)}, desc]"))(rng.choice(nums)),
        lambda: (
            lambda c: (lambda v: (f"how many {table} have {human(c)} {v}?",
                                  f"SELECT[{q(table)}]; PROJECT[{q(c)}, #1]; FILTER[#2, {q(c)} = {q(v)}]; AGGREGATE[count, #3]"))(value(c)))(rng.choice(cats)),
        lambda: (
            lambda n: (f"which {table[:-1]} has the highest {human(n)}?",
                       f"SELECT[{q(table)}]; SUPERLATIVE[#1, {q(n)}, max]"))(rng.choice(nums)),
        lambda: (
            lambda n, c: (f"what is the average {human(n)} for each {human(c)}?",
                          f"SELECT[{q(table)}]; PROJECT[{q(n)}, #1]; PROJECT[{q(c)}, #1]; GROUP[avg, #2, #3]"))(rng.choice(nums), rng.choice(cats)),
        lambda: (
            lambda n, c, m: (lambda v: (f"what is the total {human(n)} of {table} with {human(c)} {v} and {human(m)} above {median_of(m)}?",
                                        f"SELECT[{q(table)}]; FILTER[#1, {q(c)} = {q(v)}]; FILTER[#2, {q(m)} > {median_of(m)}]; PROJECT[{q(n)}, #3]; AGGREGATE[sum, #4]"))(value(c)))(*rng.sample(nums, 1), rng.choice(cats), rng.choice(nums)),
        lambda: (
            lambda n, c, m: (f"how many {table} per {human(c)} have {human(m)} of at least {median_of(m)}, by largest {human(n)} first?",
                             f"SELECT[{q(table)}]; FILTER[#1, {q(m)} >= {median_of(m)}]; SORT[#2, {q(n)}, desc]; PROJECT[{q(c)}, #3]; GROUP[count, #3, #4]"))(rng.choice(nums), rng.choice(cats), rng.choice(nums)),
        lambda: (
            lambda n, c, c2, m: (lambda v: (f"what is the minimum {human(n)} per {human(c2)} among {table} with {human(c)} {v} and {human(m)} below {median_of(m)}?",
                                            f"SELECT[{q(table)}]; FILTER[#1, {q(c)} = {q(v)}]; FILTER[#2, {q(m)} < {median_of(m)}]; PROJECT[{q(n)}, #3]; PROJECT[{q(c2)}, #3]; GROUP[min, #4, #5]"))(value(c)))(rng.choice(nums), cats[0], cats[-1], rng.choice(nums)),
    ]
    def count_above():
        m = rng.choice(nums)
        return (f"how many {table} have {human(m)} above {median_of(m)}?",
                f"SELECT[{q(table)}]; FILTER[#1, {q(m)} > {median_of(m)}]; AGGREGATE[count, #2]")

    for i in range(count):
        pick = count_above if i == len(templates) else templates[i % len(templates)]
        question, gold = pick()
        out.append({"question": question, "dataset_ref": f"bundled:{table}", "gold_pipeline": gold})
    return out


def students():
    s = "'students'"
    return [
        ("how many students are there?", f"SELECT[{s}]; AGGREGATE[count, #1]"),
        ("how many students were born in 2000?",
         f"SELECT[{s}]; PROJECT['birth_year', #1]; FILTER[#2, 'birth_year' = 2000]; AGGREGATE[count, #3]"),
        ("list the names of all students", f"SELECT[{s}]; PROJECT['name', #1]"),
        ("how many students are in each dept?", f"SELECT[{s}]; PROJECT['dept', #1]; GROUP[count, #1, #2]"),
        ("which student was born last?", f"SELECT[{s}]; SUPERLATIVE[#1, 'birth_year', max]"),
        ("list students sorted by name", f"SELECT[{s}]; SORT[#1, 'name', asc]"),
        ("what is the average id of CS students born in 2000?",
         f"SELECT[{s}]; FILTER[#1, 'dept' = 'CS']; FILTER[#2, 'birth_year' = 2000]; PROJECT['id', #3]; AGGREGATE[avg, #4]"),
        ("what is the earliest birth year of students not in ME?",
         f"SELECT[{s}]; FILTER[#1, 'dept' != 'ME']; PROJECT['birth_year', #2]; AGGREGATE[min, #3]"),
    ]


def main():
    rng = random.Random(7)
    out = [{"question": qq, "dataset_ref": "bundled:students", "gold_pipeline": g} for qq, g in students()]
    for table in ["flights", "graduates", "vehicles"]:
        out += records_for(table, rng, 14)
    assert len(out) == 50
    with open(OUT, "w") as f:
        for r in out:
            f.write(json.dumps(r) + "\n")


if __name__ == "__main__":
    main()
