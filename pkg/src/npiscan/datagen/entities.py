"""Per-entity value grammars.

Each entity owns a catalog of named formats; a value is produced by drawing a
format (uniformly unless pinned) and filling it from the RNG. For the
machine-checkable entities (SSN, UUID, IPV4, IPV6, MAC_ADDRESS, CREDIT_CARD,
EMAIL_ADDRESS, URL, BAN, PHONE_NUMBER) every format is kept inside what the
corresponding scanner pattern accepts, which is verified by a cross-module
test.
"""
from __future__ import annotations

import datetime

import numpy as np

from ..labels import label_id, label_name

_FIRST_NAMES = (
    "James", "Mary", "John", "Patricia", "Robert", "Jennifer", "Michael",
    "Linda", "William", "Elizabeth", "David", "Barbara", "Richard", "Susan",
    "Joseph", "Jessica", "Thomas", "Sarah", "Charles", "Karen", "Daniel",
    "Nancy", "Matthew", "Lisa", "Anthony", "Betty", "Mark", "Margaret",
    "Donald", "Sandra", "Steven", "Ashley", "Paul", "Kimberly", "Andrew",
    "Emily", "Joshua", "Donna", "Kenneth", "Michelle", "Kevin", "Carol",
    "Brian", "Amanda", "George", "Dorothy", "Edward", "Melissa", "Ronald",
    "Deborah", "Jane", "Grace", "Alan", "Ruth", "Walter", "Diane",
)
_LAST_NAMES = (
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller",
    "Davis", "Rodriguez", "Martinez", "Hernandez", "Lopez", "Gonzalez",
    "Wilson", "Anderson", "Thomas", "Taylor", "Moore", "Jackson", "Martin",
    "Lee", "Perez", "Thompson", "White", "Harris", "Sanchez", "Clark",
    "Ramirez", "Lewis", "Robinson", "Walker", "Young", "Allen", "King",
    "Wright", "Scott", "Torres", "Nguyen", "Hill", "Flores", "Green",
    "Adams", "Nelson", "Baker", "Hall", "Rivera", "Campbell", "Mitchell",
)
_TITLES = ("Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Gov.", "Sen.", "Capt.")

_STREET_NAMES = (
    "Main", "Oak", "Pine", "Maple", "Cedar", "Elm", "Washington", "Lake",
    "Hill", "Park", "Walnut", "Spring", "North", "Ridge", "Church",
    "Franklin", "River", "Highland", "Union", "Meadow",
)
_STREET_TYPES = ("St", "Ave", "Rd", "Blvd", "Ln", "Dr", "Ct", "Loop")
_CITIES = (
    "Houston", "Dallas", "Austin", "Chicago", "Denver", "Phoenix", "Seattle",
    "Portland", "Atlanta", "Boston", "Columbus", "Memphis", "Omaha",
    "Raleigh", "Tulsa", "Fresno",
)
_STATE_ABBREVS = (
    "TX", "CA", "NY", "FL", "IL", "PA", "OH", "GA", "NC", "MI", "NJ", "VA",
    "WA", "AZ", "MA", "TN", "IN", "MO", "MD", "WI", "CO", "MN", "SC", "AL",
)
_STATE_NAMES = (
    "Texas", "California", "New York", "Florida", "Illinois", "Ohio",
    "Georgia", "Michigan", "Virginia", "Washington", "Arizona", "Colorado",
    "Minnesota", "Alabama", "Oregon", "Kansas", "Nevada", "Iowa", "Utah",
)

_DOMAIN_WORDS = (
    "fake", "example", "acme", "globex", "initech", "umbrella", "hooli",
    "vandelay", "wonka", "stark", "wayne", "cyberdyne", "tyrell", "aperture",
)
_TLDS = ("com", "net", "org", "io", "gov", "edu", "info")
_URL_SCHEMES = ("ftp", "s3", "rpc")
_PATH_WORDS = (
    "examples", "docs", "files", "data", "reports", "static", "assets",
    "index", "home", "search", "api", "v1",
)
_UNITS = ("bits", "kg", "m", "GB", "ms", "px", "ft", "lbs", "mph", "sec")
_MONTHS = (
    "January", "February", "March", "April", "May", "June", "July", "August",
    "September", "October", "November", "December",
)
_MONTH_ABBREVS = tuple(m[:3] for m in _MONTHS)
_WEEKDAY_ABBREVS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
_TZ_ABBREVS = ("PST", "PDT", "EST", "EDT", "CST", "MST", "GMT", "UTC")
_ORDINAL_WORDS = (
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh",
    "eighth", "ninth", "tenth", "eleventh", "twelfth", "thirteenth",
    "fourteenth", "fifteenth", "sixteenth", "twentieth", "hundredth",
)
_HASH_EXTRA = "=-\\/+"
_HEX = "0123456789abcdef"


class FormatError(ValueError):
    pass


def _digits(rng, n: int, first_nonzero: bool = False) -> str:
    out = rng.integers(0, 10, size=n)
    if first_nonzero and n:
        out[0] = rng.integers(1, 10)
    return "".join(str(d) for d in out)


def _hex_digits(rng, n: int, alphabet: str = _HEX) -> str:
    return "".join(alphabet[i] for i in rng.integers(0, len(alphabet), size=n))


def _choice(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _street_line(rng) -> str:
    return f"{rng.integers(1, 10000)} {_choice(rng, _STREET_NAMES)} {_choice(rng, _STREET_TYPES)}"


def _city_state_zip(rng) -> str:
    state = _choice(rng, _STATE_ABBREVS if rng.random() < 0.7 else _STATE_NAMES)
    return f"{_choice(rng, _CITIES)}, {state}, {_digits(rng, 5)}"


def _gen_address(rng, fmt) -> str:
    if fmt == "street":
        return _street_line(rng)
    if fmt == "city_state_zip":
        return _city_state_zip(rng)
    if fmt == "po_box":
        sep = "\n" if rng.random() < 0.5 else " "
        return f"PO Box {rng.integers(1, 10000)}{sep}{_choice(rng, _CITIES)}, {_choice(rng, _STATE_ABBREVS)}"
    # street_city_state_zip, line break after the street line half the time
    sep = "\n" if rng.random() < 0.5 else ", "
    return _street_line(rng) + sep + _city_state_zip(rng)


def _gen_ban(rng, fmt) -> str:
    return _digits(rng, int(rng.integers(10, 19)), first_nonzero=True)


def _gen_credit_card(rng, fmt) -> str:
    issuer = _choice(rng, ("amex", "visa", "mastercard", "discover"))
    if issuer == "amex":
        digits = "3" + _choice(rng, "47") + _digits(rng, 13)
        groups = (3, 4, 4, 4)
    else:
        digits = {"visa": "4", "mastercard": "5", "discover": "6"}[issuer] + _digits(rng, 15)
        groups = (4, 4, 4, 4)
    if fmt == "plain":
        return digits
    delim = {"dash": "-", "space": " ", "dot": ".", "underscore": "_"}[fmt]
    parts, pos = [], 0
    for g in groups:
        parts.append(digits[pos:pos + g])
        pos += g
    return delim.join(parts)


def _rand_datetime(rng) -> datetime.datetime:
    return datetime.datetime(
        year=int(rng.integers(1970, 2030)),
        month=int(rng.integers(1, 13)),
        day=int(rng.integers(1, 29)),
        hour=int(rng.integers(0, 24)),
        minute=int(rng.integers(0, 60)),
        second=int(rng.integers(0, 60)),
    )


def _gen_datetime(rng, fmt) -> str:
    d = _rand_datetime(rng)
    month = _MONTHS[d.month - 1]
    mon = _MONTH_ABBREVS[d.month - 1]
    wday = _WEEKDAY_ABBREVS[d.weekday()]
    tz_off = f"{_choice(rng, '+-')}{int(rng.integers(0, 12)):02d}00"
    hm = f"{d.hour:02d}:{d.minute:02d}"
    hms = f"{hm}:{d.second:02d}"
    if fmt == "month_year":
        return f"{month} {d.year}"
    if fmt == "month_day":
        return f"{month} {d.day}"
    if fmt == "month_day_year":
        return f"{month} {d.day}, {d.year}"
    if fmt == "day_month":
        return f"{d.day} {month}"
    if fmt == "day_month_year":
        return f"{d.day} {month} {d.year}"
    if fmt == "rfc_offset":
        return f"{wday}, {d.day:02d} {mon} {d.year} {hms} {tz_off}"
    if fmt == "rfc_offset_tz":
        return f"{wday}, {d.day:02d} {mon} {d.year} {hms} {tz_off} ({_choice(rng, _TZ_ABBREVS)})"
    if fmt == "slash_date":
        return f"{d.month:02d}/{d.day:02d}/{d.year}"
    if fmt == "slash_datetime":
        return f"{d.month:02d}/{d.day:02d}/{d.year} {hm}"
    if fmt == "time":
        return hms
    if fmt == "time_ampm":
        hour12 = d.hour % 12 or 12
        return f"{hour12}:{d.minute:02d} {'am' if d.hour < 12 else 'pm'}"
    # abbrev_datetime
    return f"{mon} {d.day:02d} {d.year} {hms}"


def _gen_email(rng, fmt) -> str:
    local = _choice(rng, _DOMAIN_WORDS)
    domain = f"{_choice(rng, _DOMAIN_WORDS)}.{_choice(rng, _TLDS)}"
    if fmt == "plain":
        return f"{local}@{domain}"
    if fmt == "dashed":
        return f"{local}-{_choice(rng, _PATH_WORDS)}@{domain}"
    if fmt == "dotted":
        return f"{_choice(rng, _FIRST_NAMES).lower()}.{_choice(rng, _LAST_NAMES).lower()}@{domain}"
    if fmt == "tagged":
        return f"{local}+{_digits(rng, 3)}@{domain}"
    return f"{local}@localhost"


def _gen_hash_or_key(rng, fmt) -> str:
    if fmt == "key":
        alphabet = (
            "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"
            + _HASH_EXTRA
        )
        return _hex_digits(rng, int(rng.integers(16, 45)), alphabet)
    n = {"md5": 32, "sha1": 40, "sha256": 64, "sha512": 128}[fmt]
    value = _hex_digits(rng, n)
    return value.upper() if rng.random() < 0.5 else value


def _gen_ipv4(rng, fmt) -> str:
    return ".".join(str(int(o)) for o in rng.integers(0, 256, size=4))


def _ipv6_group(rng) -> str:
    return _hex_digits(rng, int(rng.integers(1, 5)))


def _gen_ipv6(rng, fmt) -> str:
    if fmt == "full":
        return ":".join(_ipv6_group(rng) for _ in range(8))
    head = [_ipv6_group(rng) for _ in range(int(rng.integers(1, 5)))]
    if fmt == "compressed":
        return ":".join(head) + "::"
    # prefixed
    return ":".join(head) + f"::/{int(rng.integers(0, 129))}"


def _gen_mac(rng, fmt) -> str:
    raw = _hex_digits(rng, 12).upper()
    if fmt == "plain":
        return raw
    if fmt == "dot4":
        return ".".join(raw[i:i + 4] for i in range(0, 12, 4))
    delim = {"dash": "-", "colon": ":"}[fmt]
    return delim.join(raw[i:i + 2] for i in range(0, 12, 2))


def _gen_phone(rng, fmt) -> str:
    area, mid, last = _digits(rng, 3, True), _digits(rng, 3), _digits(rng, 4)
    if fmt == "dash":
        return f"{area}-{mid}-{last}"
    if fmt == "dot":
        return f"{area}.{mid}.{last}"
    if fmt == "paren":
        return f"({area}) {mid}-{last}"
    if fmt == "plain":
        return f"{area}{mid}{last}"
    if fmt == "intl_paren":
        return f"+1 ({area}) {mid}-{last}"
    if fmt == "intl_plain":
        return f"+{_digits(rng, int(rng.integers(1, 4)), True)} {area}{mid}{last}"
    if fmt == "intl_dashed":
        return f"00{_digits(rng, 1, True)}-{area}-{mid}-{last}"
    if fmt == "extension":
        return f"{area}-{mid}-{last} x{_digits(rng, int(rng.integers(3, 6)), True)}"
    # extension_only
    return f"x{_digits(rng, int(rng.integers(3, 6)), True)}"


def _gen_ssn(rng, fmt) -> str:
    a, b, c = _digits(rng, 3), _digits(rng, 2), _digits(rng, 4)
    delim = {"dash": "-", "dot": ".", "plain": "", "space": " "}[fmt]
    return delim.join((a, b, c))


def _gen_url(rng, fmt) -> str:
    domain = f"{_choice(rng, _DOMAIN_WORDS)}.{_choice(rng, _TLDS)}"
    path = "/" + _choice(rng, _PATH_WORDS)
    if rng.random() < 0.4:
        path += "/" + _choice(rng, _PATH_WORDS)
    query = f"?{_choice(rng, _PATH_WORDS)}={int(rng.integers(0, 100))}" if rng.random() < 0.5 else ""
    if fmt == "https":
        return f"https://{domain}{path}{query}"
    if fmt == "https_www":
        return f"https://www.{domain}{path}{query}"
    if fmt == "www":
        return f"www.{domain}{path}{query}"
    if fmt == "bare":
        return f"{domain}{path}{query}"
    # other_scheme
    port = f":{int(rng.integers(1, 65536))}" if rng.random() < 0.3 else ""
    return f"{_choice(rng, _URL_SCHEMES)}://{domain}{port}{path}"


def _gen_uuid(rng, fmt) -> str:
    variant = _choice(rng, "89ab")
    return "-".join((
        _hex_digits(rng, 8),
        _hex_digits(rng, 4),
        "4" + _hex_digits(rng, 3),
        variant + _hex_digits(rng, 3),
        _hex_digits(rng, 12),
    ))


def _gen_person(rng, fmt) -> str:
    first = _choice(rng, _FIRST_NAMES)
    last = _choice(rng, _LAST_NAMES)
    title = _choice(rng, _TITLES)
    if fmt == "first":
        return first
    if fmt == "last":
        return last
    if fmt == "first_last":
        return f"{first} {last}"
    if fmt == "first_initial_last":
        return f"{first} {_choice(rng, _FIRST_NAMES)[0]} {last}"
    if fmt == "title_first_last":
        return f"{title} {first} {last}"
    if fmt == "title_last":
        return f"{title} {last}"
    if fmt == "last_comma_first":
        return f"{title} {last}, {first}"
    if fmt == "possessive":
        return f"{first}'s"
    # title_possessive
    return f"{title} {first}'s"


def _gen_float(rng, fmt) -> str:
    if fmt == "simple":
        return f"{int(rng.integers(0, 1000))}.{_digits(rng, int(rng.integers(1, 4)))}"
    if fmt == "trailing_dot":
        return f"{int(rng.integers(0, 1000))}."
    if fmt == "leading_dot":
        return f".{_digits(rng, int(rng.integers(1, 4)))}"
    # exponent
    return f"{int(rng.integers(1, 10))}.{_digits(rng, 2)}e{_choice(rng, '+-')}{int(rng.integers(1, 10))}"


def _gen_integer(rng, fmt) -> str:
    value = _digits(rng, int(rng.integers(1, 7)), first_nonzero=True)
    return value if fmt == "plain" else _choice(rng, "+-") + value


def _ordinal_suffix(n: int) -> str:
    if n % 100 in (11, 12, 13):
        return "th"
    return {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")


def _gen_ordinal(rng, fmt) -> str:
    if fmt == "numeric":
        n = int(rng.integers(1, 1000))
        return f"{n}{_ordinal_suffix(n)}"
    if fmt == "word":
        word = _choice(rng, _ORDINAL_WORDS)
        return word.title() if rng.random() < 0.3 else word
    parts = ".".join(str(int(p)) for p in rng.integers(0, 20, size=3))
    return f"v{parts}" if fmt == "version_v" else parts


def _gen_quantity(rng, fmt) -> str:
    magnitude = f"{int(rng.integers(0, 1000))}"
    if rng.random() < 0.5:
        magnitude += f".{_digits(rng, 2)}"
    if fmt == "dollar":
        return f"${magnitude}"
    if fmt == "unit":
        return f"{magnitude}{_choice(rng, _UNITS)}"
    if fmt == "dash_unit":
        return f"{magnitude}-{_choice(rng, _UNITS)}"
    # percent
    return f"{magnitude}%"


_GENERATORS = {
    "ADDRESS": (_gen_address, ("street", "street_city_state_zip", "city_state_zip", "po_box")),
    "BAN": (_gen_ban, ("plain",)),
    "CREDIT_CARD": (_gen_credit_card, ("plain", "dash", "space", "dot", "underscore")),
    "DATETIME": (_gen_datetime, (
        "month_year", "month_day", "month_day_year", "day_month",
        "day_month_year", "rfc_offset", "rfc_offset_tz", "slash_date",
        "slash_datetime", "time", "time_ampm", "abbrev_datetime",
    )),
    "EMAIL_ADDRESS": (_gen_email, ("plain", "dashed", "dotted", "tagged", "localhost")),
    "FLOAT": (_gen_float, ("simple", "trailing_dot", "leading_dot", "exponent")),
    "HASH_OR_KEY": (_gen_hash_or_key, ("md5", "sha1", "sha256", "sha512", "key")),
    "INTEGER": (_gen_integer, ("plain", "signed")),
    "IPV4": (_gen_ipv4, ("dotted",)),
    "IPV6": (_gen_ipv6, ("full", "compressed", "prefixed")),
    "MAC_ADDRESS": (_gen_mac, ("dash", "colon", "plain", "dot4")),
    "ORDINAL": (_gen_ordinal, ("numeric", "word", "version_v", "version")),
    "PERSON": (_gen_person, (
        "first", "last", "first_last", "first_initial_last", "title_first_last",
        "title_last", "last_comma_first", "possessive", "title_possessive",
    )),
    "PHONE_NUMBER": (_gen_phone, (
        "dash", "dot", "paren", "plain", "intl_paren", "intl_plain",
        "intl_dashed", "extension", "extension_only",
    )),
    "QUANTITY": (_gen_quantity, ("dollar", "unit", "dash_unit", "percent")),
    "SSN": (_gen_ssn, ("dash", "dot", "plain", "space")),
    "URL": (_gen_url, ("https", "https_www", "www", "bare", "other_scheme")),
    "UUID": (_gen_uuid, ("v4",)),
}


def entity_formats(entity: int) -> tuple[str, ...]:
    name = label_name(entity)
    if name not in _GENERATORS:
        raise FormatError(f"no value grammar for entity {name}")
    return _GENERATORS[name][1]


def generate_entity_value(entity: int, rng: np.random.Generator,
                          format_id: str | None = None) -> str:
    """One concrete value for an entity; format drawn uniformly when unpinned."""
    name = label_name(entity)
    if name not in _GENERATORS:
        raise FormatError(f"no value grammar for entity {name}")
    gen, formats = _GENERATORS[name]
    if format_id is None:
        format_id = formats[int(rng.integers(len(formats)))]
    elif format_id not in formats:
        raise FormatError(f"unknown format {format_id!r} for entity {name}")
    return gen(rng, format_id)


def pick_format(entity: int, rng: np.random.Generator) -> str:
    formats = entity_formats(entity)
    return formats[int(rng.integers(len(formats)))]
