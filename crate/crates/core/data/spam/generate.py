"""Generates the bundled mini spam corpus (YouTube-style comments).

Writes unlabeled.jsonl, dev.jsonl, test.jsonl and project.json next to this
script. Output is fully determined by SEED.

    python3 generate.py
"""

import json
import random
from pathlib import Path

SEED = 20201
SIZES = {"unlabeled": 1500, "dev": 150, "test": 400}
SPAM_RATE = 0.45
LABEL_NOISE = 0.03

FILL = {
    "name": ["Katy", "Eminem", "Shakira", "Rihanna", "Psy", "Justin", "Adele", "Drake", "Taylor"],
    "place": ["Brazil", "India", "Germany", "Mexico", "Canada", "Russia", "Italy", "Japan", "London", "Paris"],
    "padj": ["amazing", "beautiful", "awesome", "great", "perfect", "incredible", "wonderful"],
    "feel": ["cry", "smile", "happy", "dance", "nostalgic"],
    "rel": ["sister", "brother", "mom", "dad", "friend", "daughter", "son"],
    "year": ["2014", "2015", "2016", "2017"],
    "event": ["super bowl", "world cup", "olympics", "awards"],
    "content": ["gaming", "music", "cover", "comedy", "makeup", "vlog", "prank"],
    "prize": ["iphone", "gift card", "ipad", "laptop", "xbox", "cash prize"],
    "social": ["instagram", "twitter", "facebook", "snapchat"],
    "url": ["http://bit.ly/freegift", "www.win-prize.com", "http://goo.gl/x7Yt2", "www.easycash.net/join",
            "http://tinyurl.com/promo22"],
    "number": ["two", "three", "five", "ten", "hundred"],
    "time": ["1:15", "2:30", "3:05", "0:45"],
}

HAM = [
    "{name} is {padj}",
    "this song is {padj}",
    "i love this song",
    "{name} has such a {padj} voice",
    "who is still listening in {year}",
    "watching from {place}",
    "this video makes me {feel}",
    "best song ever",
    "the beat at the end is {padj}",
    "{name} never gets old",
    "my {rel} loves this song",
    "this brings back so many memories",
    "i can't stop listening to this",
    "the dance in this video is {padj}",
    "{name} you are my idol",
    "this song reminds me of {place}",
    "who else came here after the {event}",
    "the lyrics are so {padj}",
    "{number} billion views wow",
    "i remember when this came out",
    "her voice gives me chills",
    "this is my favorite song of all time",
    "the music video is {padj}",
    "i listen to this every day",
    "so many memories with my {rel}",
]

# ham that borrows spam vocabulary
HAM_TRICKY = [
    "check out the part at {time} it is {padj}",
    "you should check out the live version",
    "this channel always posts {padj} music",
    "i subscribed to {name} years ago",
    "my {rel} showed me this song and now i love it",
    "click replay a hundred times lol",
]

SPAM = [
    "check out my channel",
    "please subscribe to my channel",
    "subscribe to my channel for {content} videos",
    "check out my new {content} video",
    "visit {url} for a free {prize}",
    "win a free {prize} at {url}",
    "follow me on {social}",
    "make money online at {url}",
    "i will subscribe back if you subscribe to me",
    "click the link in my profile for a free {prize}",
    "hey guys please check out my {content} channel",
    "like this comment so everyone can see my channel",
    "earn {number} hundred dollars a day from home visit {url}",
    "get a free {prize} here {url}",
    "support me please subscribe",
    "my {rel} makes {content} videos please check them out",
    "go to my channel and subscribe",
    "free {prize} giveaway on my {social}",
    "follow my {social} for {content} tips",
    "i just started a {content} channel please help me get {number} hundred subscribers",
]

# spam that borrows ham vocabulary
SPAM_TRICKY = [
    "i love this song please check my {content} cover",
    "{name} is {padj} but my channel is better",
    "great song now visit {url}",
]

SHARED = ["lol", "omg", "wow", "hi everyone", "hello", "haha", "yeah", "hey"]
ENDINGS = [".", "!", "!!", "", "?"]


def fill(template, rng):
    out = template
    while "{" in out:
        start = out.index("{")
        end = out.index("}", start)
        key = out[start + 1:end]
        out = out[:start] + rng.choice(FILL[key]) + out[end + 1:]
    return out


def style(sentence, rng):
    if rng.random() < 0.6:
        sentence = sentence[0].upper() + sentence[1:]
    if rng.random() < 0.05:
        sentence = sentence.upper()
    return sentence + rng.choice(ENDINGS)


def comment(spam, rng):
    pool, tricky = (SPAM, SPAM_TRICKY) if spam else (HAM, HAM_TRICKY)
    parts = []
    if rng.random() < 0.2:
        parts.append(rng.choice(SHARED))
    n = 1 if rng.random() < 0.6 else 2
    for _ in range(n):
        source = tricky if rng.random() < 0.12 else pool
        parts.append(fill(rng.choice(source), rng))
    return " ".join(style(p, rng) for p in parts)


def main():
    rng = random.Random(SEED)
    here = Path(__file__).resolve().parent
    prefixes = {"unlabeled": "u", "dev": "d", "test": "t"}
    for split, size in SIZES.items():
        lines = []
        for i in range(size):
            spam = rng.random() < SPAM_RATE
            text = comment(spam, rng)
            label = int(spam)
            if rng.random() < LABEL_NOISE:
                label = 1 - label
            record = {"uid": f"{prefixes[split]}{i:04d}", "text": text}
            if split != "unlabeled":
                record["label"] = label
            lines.append(json.dumps(record))
        (here / f"{split}.jsonl").write_text("\n".join(lines) + "\n")
    project = {"class_names": ["ham", "spam"], "seed": 42}
    (here / "project.json").write_text(json.dumps(project, indent=2) + "\n")


if __name__ == "__main__":
    main()
