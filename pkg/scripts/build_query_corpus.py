"""Regenerate src/logsentinel/data/queries.json, the bundled query corpus.

The corpus mirrors the public MongoDB injection dataset's shape (JSON array
of {"text", "label"}, 221 injection / 179 benign) with payloads written from
common NoSQL-injection patterns and ordinary application filters.
"""

import json
import random
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "logsentinel" / "data" / "queries.json"

USERS = ["admin", "root", "administrator", "superuser", "sysadmin", "test", "guest",
         "operator", "support", "webmaster", "manager", "devops"]
FIELDS = ["username", "user", "login", "email", "name", "uid", "account", "handle"]
SECRETS = ["password", "pass", "pwd", "passwd", "token", "secret", "pin"]
PEOPLE = ["alice.johnson", "bob_martin", "carol.nguyen", "david.okafor", "emma.schmidt",
          "farhan.ali", "grace.liu", "hiro.tanaka", "isabel.costa", "jamal.wright",
          "karin.larsen", "leo.moreau", "maya.patel", "nina.kowalski", "omar.haddad",
          "priya.raman", "quentin.blake", "rosa.delgado", "sanjay.menon", "tara.obrien"]
CITIES = ["Panaji", "Margao", "Vasco da Gama", "Mapusa", "Ponda", "Bengaluru", "Mumbai",
          "Pune", "Hyderabad", "Chennai", "Kolkata", "New Delhi", "Lisbon", "Berlin"]
CATEGORIES = ["electronics", "books", "home-appliances", "garden", "sports-outdoors",
              "stationery", "toys-and-games", "groceries", "furniture", "apparel"]
STATUSES = ["active", "pending_verification", "suspended", "archived", "trial", "deleted"]
JS = [
    "sleep(5000) || true", "this.password.length > 0", "1 == 1", "true",
    "function() { return true; }()", "this.username == 'admin' || '1' == '1'",
    "var d = new Date(); do { cd = new Date(); } while (cd - d < 3000); return true;",
    "this.password.match(/^a/)", "Object.keys(this).length > 0", "db.getCollectionNames()",
    "this.role == 'admin' && sleep(2000)", "return this.isAdmin",
]
BARE = ["$function", "$accumulator", "$lookup", "$unionWith", "$merge", "$out",
        "$sleep", "$where_", "$eval", "$ninx"]
MALFORMED_BAD = [
    "admin' || '1'=='1", "'; return true; var x='", "admin\"; while(true){}; \"",
    "' && this.password.match(/.*/)//", "1; return db.users.find()", "admin' && sleep(3000) && '",
    "'; return this.a > 1; var b='", "username[$ne]=toto&password[$ne]=toto",
]
MALFORMED_OK = [
    "user=alice.johnson&page=2", "search=garden hose", "id=64b7f0c2a9&format=json",
    "q=mechanical keyboard", "email=grace.liu@example.org",
]


def q(doc):
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


def malicious(rng):
    u, f, s = rng.choice(USERS), rng.choice(FIELDS), rng.choice(SECRETS)
    js = rng.choice(JS)
    bare = rng.choice(BARE)
    n = rng.randint(1, 9)
    return {
        "ne_null_pair": lambda: q({f: {"$ne": rng.choice([None, "", "x", 1])}, s: {"$ne": rng.choice([None, "", "-1", 0])}}),
        "ne_value": lambda: q({f: {"$ne": rng.choice(["", "x", "1"])}, s: {"$ne": rng.choice(["", "wrong", "invalid"])}}),
        "ne_bare": lambda: q({f: {"$ne": None}, bare: {"body": "function(){return true}", "lang": "js"}}),
        "gt_empty": lambda: q({f: {"$gt": ""}, s: {"$gt": rng.choice(["", " ", "0"])}}),
        "regex_enum": lambda: q({f: {"$regex": rng.choice([".*", "^a", "^ad"])}, s: {"$regex": "^" + rng.choice("abcdefghijkmnopqrstuvwxyz") + ".*"}}),
        "where_js": lambda: q({f: {"$ne": u}, "$where": js} if rng.random() < 0.3 else {"$where": js}),
        "in_users": lambda: q({f: {"$in": rng.sample(USERS, 3)}, s: {"$gt": ""}}),
        "or_tautology": lambda: q({"$or": [{f: u}, {"1": "1"}]}),
        "bare_js": lambda: q({bare: {"body": f"function() {{ {js} }}", "args": [], "lang": "js"}}),
        "bare_expr": lambda: q({f: u, "$expr": {bare: {"args": [f"${s}"], "lang": "js"}}}),
        "bare_positional": lambda: q({f: {"$": u}, s: {"$": 1}}),
        "exists": lambda: q({f: u, s: {"$exists": False}}),
        "type_probe": lambda: q({f: u, s: {"$type": rng.choice([2, "string", 16])}}),
        "eq_admin": lambda: q({f: {"$eq": u}, s: {"$ne": rng.choice(["", "0", "wrong"])}}),
        "size_probe": lambda: q({f: u, "roles": {"$size": rng.randint(0, 3)}}),
        "plain_payload": lambda: q({f: u + rng.choice(["'--", "' or 1=1--", "\" || \"\"==\"", "'/*", "';%00"])}),
        "nin_empty": lambda: q({f: {"$nin": []}, s: {"$nin": []}}),
        "size_elem": lambda: q({"roles": {"$elemMatch": {"$eq": "admin"}}, f: {"$ne": u}}),
        "mod_probe": lambda: q({"uid": {"$mod": [n, 0]}, f: u}),
        "malformed": lambda: rng.choice(MALFORMED_BAD),
    }


def benign(rng):
    p, c, cat = rng.choice(PEOPLE), rng.choice(CITIES), rng.choice(CATEGORIES)
    st = rng.choice(STATUSES)
    a, b = sorted(rng.sample(range(16, 90), 2))
    return {
        "eq_one": lambda: q({rng.choice(["username", "email", "customer_name", "display_name"]): p}),
        "eq_many": lambda: q({"city": c, "category": cat, "status": st}),
        "range_gte": lambda: q({"age": {"$gte": a, "$lte": b}, "city": c}),
        "range_gt": lambda: q({"price": {"$gt": a, "$lt": b * 10}, "category": cat}),
        "in_list": lambda: q({"category": {"$in": rng.sample(CATEGORIES, 2)}}),
        "ne_status": lambda: q({"status": {"$ne": st}, "city": c}),
        "regex_name": lambda: q({"customer_name": {"$regex": "^" + p.split(".")[0][:3], "$options": "i"}}),
        "or_eq": lambda: q({"$or": [{"city": c}, {"category": cat}]}),
        "exists": lambda: q({rng.choice(["address.zip", "gst_number", "avatar_url", "phone"]): {"$exists": rng.choice([True, False])}, "city": c}),
        "where_cmp": lambda: q({"$where": "this.%s %s this.%s" % (rng.choice(["price", "stock", "updated_at", "discount"]),
                                                                  rng.choice([">", "<", ">="]),
                                                                  rng.choice(["cost", "reorder_level", "created_at", "list_price"]))}),
        "elem": lambda: q({"order_items": {"$elemMatch": {"sku": f"SKU-{a}{b}", "quantity": {"$gte": 2}}}}),
        "and_range": lambda: q({"$and": [{"rating": {"$gte": 3}}, {"review_count": {"$gt": a}}]}),
        "size_tags": lambda: q({"tags": {"$size": rng.randint(1, 5)}, "category": cat}),
        "nested": lambda: q({"profile.address.city": c, "profile.preferences.newsletter": True}),
        "bare_slip": lambda: q({rng.choice(["$sort", "$project", "$limit", "$sample"]): {rng.choice(["created_at", "price", "rating"]): -1}, "city": c}),
        "eq_op": lambda: q({"status": {"$eq": st}, "city": c}),
        "type_check": lambda: q({"phone_number": {"$type": "string"}, "city": c}),
        "null_check": lambda: q({"deleted_at": None, "category": cat}),
        "text_search": lambda: q({"$text": {"$search": rng.choice(["garden hose", "wireless earbuds", "yoga mat", "monsoon jacket", "cast iron pan", "kids bicycle"])}, "category": cat}),
        "in_null": lambda: q({rng.choice(["middle_name", "referral_code", "coupon"]): {"$in": [None, ""]}, "city": c}),
        "ne_null": lambda: q({"email_verified_at": {"$ne": None}, "city": c}),
        "nin_list": lambda: q({"status": {"$nin": ["archived", "deleted"]}, "city": c}),
        "mod_even": lambda: q({"invoice_number": {"$mod": [2, 0]}, "category": cat}),
        "malformed": lambda: rng.choice(MALFORMED_OK),
    }


MAL_COUNTS = {
    "ne_null_pair": 25, "ne_value": 14, "ne_bare": 10, "gt_empty": 14, "regex_enum": 12, "where_js": 12, "in_users": 10, "or_tautology": 16, "bare_js": 24, "bare_expr": 14, "bare_positional": 4, "exists": 8, "type_probe": 6, "eq_admin": 8, "plain_payload": 25, "nin_empty": 2, "size_elem": 8, "mod_probe": 1, "malformed": 4, "size_probe": 4,
}
BEN_COUNTS = {
    "eq_one": 15, "eq_many": 8, "range_gte": 14, "range_gt": 12, "in_list": 6, "ne_status": 12, "regex_name": 10, "or_eq": 7, "exists": 8, "where_cmp": 8, "elem": 6, "and_range": 6, "size_tags": 4, "nested": 4, "bare_slip": 6, "eq_op": 6, "type_check": 6, "null_check": 4, "ne_null": 12, "nin_list": 2, "mod_even": 1, "malformed": 4, "text_search": 12, "in_null": 6,
}


def generate(seed=2024):
    rng = random.Random(seed)
    out = []
    seen = set()
    for label, counts, make in ((1, MAL_COUNTS, malicious), (0, BEN_COUNTS, benign)):
        for name, count in counts.items():
            made = 0
            tries = 0
            while made < count:
                tries += 1
                if tries > 10000:
                    raise RuntimeError(f"cannot make {count} unique {name}")
                text = make(rng)[name]()
                if text in seen:
                    continue
                seen.add(text)
                out.append({"text": text, "label": label, "family": name})
                made += 1
    rng.shuffle(out)
    return out


def main():
    items = generate()
    n1 = sum(i["label"] for i in items)
    assert (n1, len(items) - n1) == (221, 179), (n1, len(items) - n1)
    if "--dry-run" not in sys.argv:
        OUT.write_text(json.dumps([{"text": i["text"], "label": i["label"]} for i in items],
                                  indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    return items


if __name__ == "__main__":
    main()
