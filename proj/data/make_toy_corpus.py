#!/usr/bin/env python3
# Copyright 2026 The dpsynth Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates toy_real.jsonl, the bundled stand-in for a private corpus."""

import json
import random

TEMPLATES = [
    "Write a short poem about {topic}.",
    "Explain {topic} to a ten year old.",
    "Give me three tips for {activity}.",
    "Summarize the main arguments for {topic} in two sentences.",
    "What is the difference between {thing} and {other}?",
    "Draft a polite email asking a colleague about {activity}.",
    "List five common mistakes people make when {activity}.",
    "How do I get started with {activity}?",
    "Translate 'good morning' into {language}.",
    "Suggest a name for a shop that sells {thing}.",
    "Describe {topic} in the style of a news report.",
    "Why is {topic} important for small towns?",
]
TOPICS = ["renewable energy", "the water cycle", "public libraries",
          "photosynthesis", "remote work", "urban gardening", "sleep hygiene",
          "volcanoes", "the printing press", "recycling", "tidal power",
          "bird migration", "coral reefs", "local elections", "honeybees",
          "solar eclipses", "compost", "rail travel", "museums", "glaciers"]
ACTIVITIES = ["learning to cook", "running a marathon", "writing a novel",
              "planning a trip", "saving money", "learning the guitar",
              "painting with watercolors", "training a puppy", "baking bread",
              "starting a podcast", "learning to swim", "growing tomatoes",
              "moving to a new city", "studying for exams", "fixing a bike",
              "hosting a dinner", "keeping a journal"]
THINGS = ["tea", "bicycles", "houseplants", "old maps", "candles", "kites",
          "notebooks", "board games"]
LANGUAGES = ["French", "Spanish", "German", "Italian", "Portuguese"]
PREFIXES = ["", "", "Please help: ", "For a school project, ", "Quick question. "]
SUFFIXES = ["", "", " Keep it brief.", " Use bullet points.", " Add one example."]


def main():
  rng = random.Random(20261018)
  records = []
  seen = set()
  while len(records) < 1500:
    text = rng.choice(PREFIXES) + rng.choice(TEMPLATES).format(
        topic=rng.choice(TOPICS), activity=rng.choice(ACTIVITIES),
        thing=rng.choice(THINGS), other=rng.choice(THINGS),
        language=rng.choice(LANGUAGES)) + rng.choice(SUFFIXES)
    # A few exact repeats are kept so preprocessing has work to do.
    if text in seen and rng.random() < 0.8:
      continue
    seen.add(text)
    meta = {"language": "en"}
    if rng.random() < 0.02:
      meta["moderation"] = "flagged"
    records.append({"id": f"toy-{len(records)}", "text": text, "meta": meta})
  with open("toy_real.jsonl", "w") as out:
    for r in records:
      out.write(json.dumps(r) + "\n")


if __name__ == "__main__":
  main()
