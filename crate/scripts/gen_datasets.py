#!/usr/bin/env python3
"""Regenerate the bundled synthetic desk datasets (deterministic)."""
import csv
import datetime as dt
import json
import os
import random

ROOT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data")


def write(name, header, rows, hints=None):
    d = os.path.join(ROOT, name)
    os.makedirs(d, exist_ok=True)
    with open(os.path.join(d, f"{name}.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else v for v in r])
    if hints:
        with open(os.path.join(d, "types.json"), "w") as f:
            json.dump(hints, f, indent=2, sort_keys=True)
            f.write("\n")


def students():
    rows = [(1, "Amy", 2000, "CS"), (2, "Bob", 1999, "EE"), (3, "Cal", 2000, "CS"), (4, "Dee", 2001, "ME")]
    write("students", ["id", "name", "birth_year", "dept"], rows)


def flights(rng):
    airlines = ["Delta", "United", "American", "Southwest", "JetBlue", "Alaska"]
    airports = ["ATL", "ORD", "DFW", "DEN", "LAX", "JFK", "SEA", "SFO"]
    start = dt.date(2022, 1, 1)
    rows = []
    for i in range(168):
        o, d = rng.sample(airports, 2)
        date = start + dt.timedelta(days=rng.randrange(365))
        distance = rng.randrange(180, 2800)
        dep = rng.choice([rng.randrange(-10, 15), rng.randrange(15, 180)])
        arr = dep + rng.randrange(-20, 25)
        pax = rng.randrange(60, 300)
        rows.append((f"FL{1001 + i}", rng.choice(airlines), o, d, date.isoformat(), distance, dep, arr, pax))
    write("flights", ["flight_id", "airline", "origin", "destination", "flight_date",
                      "distance", "dep_delay", "arr_delay", "passengers"], rows)


def graduates(rng):
    majors = ["Computer Science", "Economics", "Biology", "Physics", "History", "Mathematics", "Chemistry", "Art"]
    unis = ["North State", "Lakeside", "Riverside Tech", "Hillcrest", "Bayview", "Summit"]
    rows = []
    for i in range(136):
        major = rng.choice(majors)
        degree = rng.choice(["BS", "BS", "BS", "MS", "MS", "PhD"])
        base = {"BS": 52000, "MS": 64000, "PhD": 78000}[degree]
        salary = base + rng.randrange(-8000, 30000, 500)
        gpa = round(rng.uniform(2.4, 4.0), 2)
        age = {"BS": 22, "MS": 24, "PhD": 28}[degree] + rng.randrange(0, 5)
        rows.append((f"G{i + 1:03d}", major, degree, rng.choice(["F", "M"]), rng.choice(unis),
                     rng.randrange(2015, 2023), gpa, salary, age))
    write("graduates", ["graduate_id", "major", "degree", "gender", "university",
                        "graduation_year", "gpa", "starting_salary", "age"], rows)


def vehicles(rng):
    makes = {"usa": ["ford", "chevrolet", "plymouth", "dodge", "amc"],
             "europe": ["volkswagen", "peugeot", "fiat", "volvo"],
             "japan": ["toyota", "datsun", "honda", "mazda"]}
    rows = []
    null_hp = set(rng.sample(range(389), 6))
    for i in range(389):
        origin = rng.choice(["usa", "usa", "usa", "europe", "japan"])
        make = rng.choice(makes[origin])
        cyl = rng.choice([4, 4, 6, 8]) if origin == "usa" else rng.choice([4, 4, 4, 6])
        hp = None if i in null_hp else int(40 + cyl * 12 + rng.randrange(0, 60))
        weight = 1600 + cyl * 350 + rng.randrange(0, 900)
        accel = round(rng.uniform(8.0, 24.8), 1)
        year = rng.randrange(1970, 1983)
        mpg = round(max(9.0, 48 - cyl * 3.2 - weight / 400 + rng.uniform(-3, 5)), 1)
        rows.append((f"{make} m{i + 1:03d}", make, origin, year, cyl, hp, weight, accel, mpg))
    write("vehicles", ["model", "make", "origin", "model_year", "cylinders",
                       "horsepower", "weight", "acceleration", "mpg"], rows,
          hints={"vehicles.weight": "numerical"})


if __name__ == "__main__":
    rng = random.Random(20230101)
    students()
    flights(rng)
    graduates(rng)
    vehicles(rng)
