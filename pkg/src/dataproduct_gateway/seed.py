"""Seed registry: two data products on the two approval paths.

The customers product carries PII columns (name, email) and lands on the
manual-approval path; the support-tickets product is internal-only data on
the automatic path. Three policy rules drive every decision:

    10 automated-benign-access   <= confidential + {analytics, support_operations} -> auto
    20 block-marketing-outreach  purpose marketing_outreach                        -> deny
    30 manual-review-fallback    everything else                                   -> manual
"""

from __future__ import annotations

import json
from pathlib import Path

TEAMS = [
    {"id": "data-platform", "name": "Data Platform"},
    {"id": "growth-analytics", "name": "Growth Analytics"},
]

USERS = [
    {
        "id": "alice",
        "display_name": "Alice Moran",
        "team_id": "growth-analytics",
        "api_key": "key-alice-analyst",
    },
    {
        "id": "bob",
        "display_name": "Bob Keane",
        "team_id": "growth-analytics",
        "api_key": "key-bob-analyst",
    },
    {
        "id": "dana",
        "display_name": "Dana Vogel",
        "team_id": "data-platform",
        "api_key": "key-dana-owner",
    },
]

CONTRACTS = [
    {
        "id": "customers-contract",
        "tables": {
            "customers": [
                {"name": "id", "value_type": "integer", "classification": "internal",
                 "description": "customer number"},
                {"name": "name", "value_type": "text", "classification": "pii",
                 "description": "legal company contact name"},
                {"name": "email", "value_type": "text", "classification": "pii",
                 "description": "primary contact email"},
                {"name": "country", "value_type": "text", "classification": "internal",
                 "description": "ISO country code"},
                {"name": "signup_date", "value_type": "date", "classification": "internal",
                 "description": "first contract date"},
            ],
            "orders": [
                {"name": "order_id", "value_type": "integer", "classification": "internal",
                 "description": "order number"},
                {"name": "customer_id", "value_type": "integer", "classification": "internal",
                 "description": "customer number"},
                {"name": "amount", "value_type": "decimal2", "classification": "confidential",
                 "description": "order value in EUR"},
                {"name": "order_date", "value_type": "date", "classification": "internal",
                 "description": "booking date"},
            ],
        },
        "terms": {
            "allowed_purposes": {
                "internal": ["analytics", "reporting", "support_operations", "research"],
                "confidential": ["analytics", "reporting"],
                "pii": ["analytics", "support_operations"],
            },
            "row_limit": 1000,
            "notes": "Contact data may never leave the analytics context.",
        },
    },
    {
        "id": "support-tickets-contract",
        "tables": {
            "tickets": [
                {"name": "ticket_id", "value_type": "integer", "classification": "internal",
                 "description": "ticket number"},
                {"name": "category", "value_type": "text", "classification": "internal",
                 "description": "issue category label"},
                {"name": "opened_date", "value_type": "date", "classification": "internal",
                 "description": "date the ticket was opened"},
                {"name": "resolved", "value_type": "boolean", "classification": "internal",
                 "description": "whether the ticket is closed"},
                {"name": "handle_hours", "value_type": "decimal2", "classification": "internal",
                 "description": "hours spent handling"},
            ],
        },
        "terms": {
            "allowed_purposes": {
                "internal": ["analytics", "reporting", "support_operations", "research"],
            },
            "row_limit": 500,
            "notes": "",
        },
    },
]

PRODUCTS = [
    {
        "id": "customers",
        "title": "Customer Master Data",
        "description": (
            "Master records for business clients including contact details, "
            "plus their order history."
        ),
        "owner_team": "data-platform",
        "status": "active",
        "output_ports": [
            {"id": "customers-table", "port_type": "table-store",
             "dataset_ref": "customers", "contract_ref": "customers-contract"},
            {"id": "orders-table", "port_type": "table-store",
             "dataset_ref": "orders", "contract_ref": "customers-contract"},
        ],
        "tags": ["crm", "orders"],
    },
    {
        "id": "support-tickets",
        "title": "Support Tickets",
        "description": (
            "Operational records of support tickets raised by clients, with "
            "category labels for issue analysis."
        ),
        "owner_team": "data-platform",
        "status": "active",
        "output_ports": [
            {"id": "tickets-table", "port_type": "table-store",
             "dataset_ref": "tickets", "contract_ref": "support-tickets-contract"},
        ],
        "tags": ["support"],
    },
]

POLICIES = [
    {
        "rule_id": "automated-benign-access",
        "priority": 10,
        "match": {
            "max_classification": "confidential",
            "purpose_in": ["analytics", "support_operations"],
        },
        "effect": "auto_approve",
    },
    {
        "rule_id": "block-marketing-outreach",
        "priority": 20,
        "match": {"purpose_in": ["marketing_outreach"]},
        "effect": "deny",
        "warning_template": "Marketing outreach requires a dedicated campaign review.",
    },
    {
        "rule_id": "manual-review-fallback",
        "priority": 30,
        "match": {"max_classification": "pii"},
        "effect": "require_manual",
    },
]

CUSTOMERS_CSV = """\
id,name,email,country,signup_date
1,Acme Corp,contact@acme.example,DE,2021-03-14
2,Bolt GmbH,info@bolt.example,DE,2020-11-02
3,Crane Ltd,hello@crane.example,GB,2022-01-25
4,Delta SA,office@delta.example,FR,2019-07-08
5,Ember LLC,team@ember.example,US,2023-05-30
"""

CUSTOMERS_SCHEMA = """\
id:integer:internal
name:text:pii
email:text:pii
country:text:internal
signup_date:date:internal
"""

ORDERS_CSV = """\
order_id,customer_id,amount,order_date
1,1,1200.50,2024-01-15
2,2,340.00,2024-01-20
3,1,2250.00,2024-02-03
4,3,99.99,2024-02-10
5,4,4100.25,2024-02-14
6,2,560.10,2024-03-01
7,5,75.00,2024-03-05
8,1,810.40,2024-03-18
9,4,1900.00,2024-04-02
10,3,450.75,2024-04-11
11,5,3020.80,2024-04-20
12,2,120.99,2024-05-06
"""

ORDERS_SCHEMA = """\
order_id:integer:internal
customer_id:integer:internal
amount:decimal2:confidential
order_date:date:internal
"""

TICKETS_CSV = """\
ticket_id,category,opened_date,resolved,handle_hours
1,billing,2024-01-03,true,2.50
2,login,2024-01-04,true,1.00
3,billing,2024-01-06,false,4.25
4,shipping,2024-01-09,true,3.70
5,login,2024-01-12,true,0.75
6,billing,2024-01-15,true,2.00
7,product,2024-01-18,false,6.40
8,shipping,2024-01-21,true,1.90
9,login,2024-01-22,false,2.20
10,billing,2024-01-25,true,3.10
11,product,2024-01-28,true,5.00
12,shipping,2024-02-01,true,2.80
13,login,2024-02-03,true,1.50
14,billing,2024-02-07,false,2.95
15,product,2024-02-10,true,4.60
"""

TICKETS_SCHEMA = """\
ticket_id:integer:internal
category:text:internal
opened_date:date:internal
resolved:boolean:internal
handle_hours:decimal2:internal
"""


def write_seed(target_dir: Path | str, force: bool = False) -> Path:
    """Materialize the seed registry; refuses a non-empty target without force."""
    target = Path(target_dir)
    if target.exists() and any(target.iterdir()) and not force:
        raise FileExistsError(f"{target} is not empty (use force to overwrite)")
    for sub in ("products", "contracts", "teams", "users", "policies", "datasets"):
        (target / sub).mkdir(parents=True, exist_ok=True)

    def dump(sub: str, name: str, doc: dict) -> None:
        path = target / sub / f"{name}.json"
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    for team in TEAMS:
        dump("teams", team["id"], team)
    for user in USERS:
        dump("users", user["id"], user)
    for contract in CONTRACTS:
        dump("contracts", contract["id"], contract)
    for product in PRODUCTS:
        dump("products", product["id"], product)
    for policy in POLICIES:
        dump("policies", policy["rule_id"], policy)

    datasets = target / "datasets"
    (datasets / "customers.csv").write_text(CUSTOMERS_CSV, encoding="utf-8")
    (datasets / "customers.schema").write_text(CUSTOMERS_SCHEMA, encoding="utf-8")
    (datasets / "orders.csv").write_text(ORDERS_CSV, encoding="utf-8")
    (datasets / "orders.schema").write_text(ORDERS_SCHEMA, encoding="utf-8")
    (datasets / "tickets.csv").write_text(TICKETS_CSV, encoding="utf-8")
    (datasets / "tickets.schema").write_text(TICKETS_SCHEMA, encoding="utf-8")
    return target
