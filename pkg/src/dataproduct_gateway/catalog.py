"""Data product and data contract registry.

Loads one JSON document per entity from a registry directory, validates
every cross-reference, and answers metadata queries. The registry stores
metadata only; row data lives in CSV datasets read by the executor.

Document layout (all lower_snake_case field names):

    products/*.json   {id, title, description, owner_team, status,
                       output_ports: [{id, port_type, dataset_ref, contract_ref}],
                       tags: [..]}
    contracts/*.json  {id, tables: {name: [{name, value_type, classification,
                       description}]}, terms: {allowed_purposes, row_limit, notes}}
    teams/*.json      {id, name}
    users/*.json      {id, display_name, team_id, api_key}
    policies/*.json   {rule_id, priority, match: {..}, effect, warning_template}
    datasets/*.csv    RFC-4180 CSV, header row required
    datasets/*.schema one "name:value_type:classification" line per column
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .governance import PolicyRule, RuleMatch
from .model import (
    CLASSIFICATION_RANK,
    CLASSIFICATIONS,
    PURPOSE_CATEGORIES,
    VALUE_TYPES,
    canonical_json,
)

PRODUCT_STATUSES = ("active", "draft", "retired")
ACCESS_STATUSES = ("none", "pending", "active", "rejected")


class RegistryError(Exception):
    """Base class for registry load failures."""


class DocumentParseError(RegistryError):
    """A registry document is malformed (bad JSON or bad field content)."""

    def __init__(self, file: str, line: int, message: str):
        super().__init__(f"{file}:{line}: {message}")
        self.file = file
        self.line = line


class MissingReference(RegistryError):
    def __init__(self, entity: str, ref: str):
        super().__init__(f"{entity} references unknown entity {ref!r}")
        self.entity = entity
        self.ref = ref


class DuplicateId(RegistryError):
    def __init__(self, id: str):
        super().__init__(f"duplicate id {id!r}")
        self.id = id


@dataclass(frozen=True)
class ColumnDef:
    name: str
    value_type: str
    classification: str
    description: str = ""


@dataclass(frozen=True)
class ContractTerms:
    allowed_purposes: dict[str, frozenset[str]]
    row_limit: int
    notes: str = ""


@dataclass(frozen=True)
class DataContract:
    id: str
    tables: dict[str, tuple[ColumnDef, ...]]
    terms: ContractTerms

    def classifications_used(self) -> tuple[str, ...]:
        used = {col.classification for cols in self.tables.values() for col in cols}
        return tuple(c for c in CLASSIFICATIONS if c in used)

    def max_classification(self) -> str:
        return max(self.classifications_used(), key=CLASSIFICATION_RANK.__getitem__)

    def columns_with_classification(self, classification: str) -> tuple[str, ...]:
        refs = [
            f"{table}.{col.name}"
            for table, cols in sorted(self.tables.items())
            for col in cols
            if col.classification == classification
        ]
        return tuple(refs)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "tables": {
                name: [
                    {
                        "name": c.name,
                        "value_type": c.value_type,
                        "classification": c.classification,
                        "description": c.description,
                    }
                    for c in cols
                ]
                for name, cols in self.tables.items()
            },
            "terms": {
                "allowed_purposes": {
                    cls: sorted(purposes)
                    for cls, purposes in self.terms.allowed_purposes.items()
                },
                "row_limit": self.terms.row_limit,
                "notes": self.terms.notes,
            },
        }


@dataclass(frozen=True)
class OutputPort:
    id: str
    port_type: str
    dataset_ref: str
    contract_ref: str


@dataclass(frozen=True)
class DataProduct:
    id: str
    title: str
    description: str
    owner_team: str
    status: str
    output_ports: tuple[OutputPort, ...]
    tags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "owner_team": self.owner_team,
            "status": self.status,
            "output_ports": [
                {
                    "id": p.id,
                    "port_type": p.port_type,
                    "dataset_ref": p.dataset_ref,
                    "contract_ref": p.contract_ref,
                }
                for p in self.output_ports
            ],
            "tags": list(self.tags),
        }


@dataclass(frozen=True)
class Team:
    id: str
    name: str


@dataclass(frozen=True)
class User:
    id: str
    display_name: str
    team_id: str
    api_key: str


@dataclass(frozen=True)
class ProductSummary:
    """Discovery result: never carries ports, contracts, or connection data."""

    id: str
    name: str
    description: str
    owner: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "owner": self.owner,
        }


@dataclass(frozen=True)
class ProductDetail:
    product: DataProduct
    contracts: tuple[DataContract, ...]
    access_status: str

    def to_json(self) -> dict:
        return {
            "product": self.product.to_json(),
            "contracts": [c.to_json() for c in self.contracts],
            "connection_details": [
                {"port_id": p.id, "port_type": p.port_type, "dataset_ref": p.dataset_ref}
                for p in self.product.output_ports
            ],
            "access_status": self.access_status,
        }


@dataclass
class Registry:
    root_dir: Path
    products: dict[str, DataProduct] = field(default_factory=dict)
    contracts: dict[str, DataContract] = field(default_factory=dict)
    teams: dict[str, Team] = field(default_factory=dict)
    users: dict[str, User] = field(default_factory=dict)
    policies: tuple[PolicyRule, ...] = ()
    # Lowercased "id\ntitle\ndescription" per product; the separator stops
    # terms from matching across field boundaries.
    _search_blobs: dict[str, str] = field(default_factory=dict)

    @property
    def dataset_dir(self) -> Path:
        return self.root_dir / "datasets"

    def user_by_key(self, api_key: str) -> User | None:
        for user in self.users.values():
            if user.api_key == api_key:
                return user
        return None

    def contracts_for(self, product: DataProduct) -> tuple[DataContract, ...]:
        seen: list[DataContract] = []
        for port in product.output_ports:
            contract = self.contracts[port.contract_ref]
            if contract not in seen:
                seen.append(contract)
        return tuple(seen)

    def canonical(self) -> str:
        """Canonical serialization of the loaded metadata (idempotence checks)."""
        doc = {
            "products": [self.products[k].to_json() for k in sorted(self.products)],
            "contracts": [self.contracts[k].to_json() for k in sorted(self.contracts)],
            "teams": [
                {"id": t.id, "name": t.name}
                for t in sorted(self.teams.values(), key=lambda t: t.id)
            ],
            "users": [
                {"id": u.id, "display_name": u.display_name, "team_id": u.team_id}
                for u in sorted(self.users.values(), key=lambda u: u.id)
            ],
            "policies": [
                {
                    "rule_id": r.rule_id,
                    "priority": r.priority,
                    "effect": r.effect,
                    "match": {
                        "max_classification": r.match.max_classification,
                        "purpose_in": sorted(r.match.purpose_in) if r.match.purpose_in else None,
                        "same_team": r.match.same_team,
                    },
                    "warning_template": r.warning_template,
                }
                for r in self.policies
            ],
        }
        return canonical_json(doc)


def _read_documents(directory: Path) -> list[tuple[str, dict]]:
    docs = []
    for path in sorted(directory.glob("*.json")):
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DocumentParseError(str(path), exc.lineno, exc.msg) from exc
        if not isinstance(raw, dict):
            raise DocumentParseError(str(path), 1, "document must be a JSON object")
        docs.append((str(path), raw))
    return docs


def _require(doc: dict, file: str, key: str, kind=str):
    if key not in doc:
        raise DocumentParseError(file, 1, f"missing field {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise DocumentParseError(file, 1, f"field {key!r} must be {kind.__name__}")
    return value


def _optional_str(doc: dict, file: str, key: str, default: str | None = "") -> str | None:
    value = doc.get(key, default)
    if value is not default and not isinstance(value, str):
        raise DocumentParseError(file, 1, f"field {key!r} must be a string")
    return value


def _string_list(doc: dict, file: str, key: str) -> tuple[str, ...]:
    value = doc.get(key, [])
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        raise DocumentParseError(file, 1, f"field {key!r} must be a list of strings")
    return tuple(value)


def _parse_column(raw: dict, file: str) -> ColumnDef:
    name = _require(raw, file, "name")
    value_type = _require(raw, file, "value_type")
    classification = _require(raw, file, "classification")
    if value_type not in VALUE_TYPES:
        raise DocumentParseError(file, 1, f"unknown value_type {value_type!r}")
    if classification not in CLASSIFICATIONS:
        raise DocumentParseError(file, 1, f"unknown classification {classification!r}")
    return ColumnDef(name, value_type, classification, _optional_str(raw, file, "description"))


def _parse_contract(raw: dict, file: str) -> DataContract:
    contract_id = _require(raw, file, "id")
    tables_raw = _require(raw, file, "tables", dict)
    if not tables_raw:
        raise DocumentParseError(file, 1, "contract has no tables")
    tables: dict[str, tuple[ColumnDef, ...]] = {}
    for table_name, cols_raw in tables_raw.items():
        if not isinstance(cols_raw, list) or not cols_raw:
            raise DocumentParseError(file, 1, f"table {table_name!r} must list >=1 column")
        cols = tuple(_parse_column(c, file) for c in cols_raw)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise DocumentParseError(file, 1, f"duplicate column name in table {table_name!r}")
        tables[table_name] = cols
    terms_raw = _require(raw, file, "terms", dict)
    allowed_raw = _require(terms_raw, file, "allowed_purposes", dict)
    allowed: dict[str, frozenset[str]] = {}
    for cls, purposes in allowed_raw.items():
        if cls not in CLASSIFICATIONS:
            raise DocumentParseError(file, 1, f"unknown classification {cls!r} in allowed_purposes")
        bad = [p for p in purposes if p not in PURPOSE_CATEGORIES]
        if bad:
            raise DocumentParseError(file, 1, f"unknown purpose categories {bad}")
        allowed[cls] = frozenset(purposes)
    row_limit = _require(terms_raw, file, "row_limit", int)
    if row_limit < 1:
        raise DocumentParseError(file, 1, "row_limit must be >= 1")
    contract = DataContract(
        id=contract_id,
        tables=tables,
        terms=ContractTerms(allowed, row_limit, _optional_str(terms_raw, file, "notes")),
    )
    for cls in contract.classifications_used():
        if cls not in allowed:
            raise DocumentParseError(
                file, 1, f"allowed_purposes lacks an entry for used classification {cls!r}"
            )
    return contract


def _parse_product(raw: dict, file: str) -> DataProduct:
    product_id = _require(raw, file, "id")
    if not product_id:
        raise DocumentParseError(file, 1, "product id must be non-empty")
    status = _require(raw, file, "status")
    if status not in PRODUCT_STATUSES:
        raise DocumentParseError(file, 1, f"unknown status {status!r}")
    ports_raw = _require(raw, file, "output_ports", list)
    ports = []
    for port_raw in ports_raw:
        port_type = _require(port_raw, file, "port_type")
        if port_type != "table-store":
            raise DocumentParseError(file, 1, f"unknown port_type {port_type!r}")
        ports.append(
            OutputPort(
                id=_require(port_raw, file, "id"),
                port_type=port_type,
                dataset_ref=_require(port_raw, file, "dataset_ref"),
                contract_ref=_require(port_raw, file, "contract_ref"),
            )
        )
    if status == "active" and not ports:
        raise DocumentParseError(file, 1, "active product needs at least one output port")
    return DataProduct(
        id=product_id,
        title=_require(raw, file, "title"),
        description=_require(raw, file, "description"),
        owner_team=_require(raw, file, "owner_team"),
        status=status,
        output_ports=tuple(ports),
        tags=_string_list(raw, file, "tags"),
    )


def _parse_policy(raw: dict, file: str) -> PolicyRule:
    effect = _require(raw, file, "effect")
    if effect not in ("auto_approve", "require_manual", "deny"):
        raise DocumentParseError(file, 1, f"unknown effect {effect!r}")
    match_raw = _require(raw, file, "match", dict)
    max_classification = match_raw.get("max_classification")
    if max_classification is not None and max_classification not in CLASSIFICATIONS:
        raise DocumentParseError(file, 1, f"unknown classification {max_classification!r}")
    purpose_in = match_raw.get("purpose_in")
    if purpose_in is not None:
        bad = [p for p in purpose_in if p not in PURPOSE_CATEGORIES]
        if bad:
            raise DocumentParseError(file, 1, f"unknown purpose categories {bad}")
        purpose_in = frozenset(purpose_in)
    same_team = match_raw.get("same_team")
    match = RuleMatch(max_classification, purpose_in, same_team)
    if match.is_empty():
        raise DocumentParseError(file, 1, "policy rule needs at least one match field")
    return PolicyRule(
        rule_id=_require(raw, file, "rule_id"),
        priority=_require(raw, file, "priority", int),
        match=match,
        effect=effect,
        warning_template=_optional_str(raw, file, "warning_template", default=None),
    )


def load_registry(root_dir: Path | str) -> Registry:
    """Load and cross-validate a registry directory.

    Raises MissingReference on dangling refs, DuplicateId on id collisions,
    and DocumentParseError on malformed documents. The returned registry is
    immutable for the life of the process; edits require a reload.
    """
    root = Path(root_dir)
    for sub in ("products", "contracts", "teams", "users", "policies", "datasets"):
        if not (root / sub).is_dir():
            raise RegistryError(f"registry dir {root} lacks subdirectory {sub}/")

    registry = Registry(root_dir=root)

    for file, raw in _read_documents(root / "teams"):
        team = Team(_require(raw, file, "id"), _require(raw, file, "name"))
        if team.id in registry.teams:
            raise DuplicateId(team.id)
        registry.teams[team.id] = team

    seen_keys: dict[str, str] = {}
    for file, raw in _read_documents(root / "users"):
        user = User(
            id=_require(raw, file, "id"),
            display_name=_require(raw, file, "display_name"),
            team_id=_require(raw, file, "team_id"),
            api_key=_require(raw, file, "api_key"),
        )
        if user.id in registry.users:
            raise DuplicateId(user.id)
        if user.api_key in seen_keys:
            raise RegistryError(
                f"user {user.id!r} reuses the api_key of user {seen_keys[user.api_key]!r}"
            )
        seen_keys[user.api_key] = user.id
        if user.team_id not in registry.teams:
            raise MissingReference(f"user:{user.id}", user.team_id)
        registry.users[user.id] = user

    for file, raw in _read_documents(root / "contracts"):
        contract = _parse_contract(raw, file)
        if contract.id in registry.contracts:
            raise DuplicateId(contract.id)
        registry.contracts[contract.id] = contract

    for file, raw in _read_documents(root / "products"):
        product = _parse_product(raw, file)
        if product.id in registry.products:
            raise DuplicateId(product.id)
        if product.owner_team not in registry.teams:
            raise MissingReference(f"product:{product.id}", product.owner_team)
        for port in product.output_ports:
            if port.contract_ref not in registry.contracts:
                raise MissingReference(f"product:{product.id}", port.contract_ref)
            for suffix in (".csv", ".schema"):
                if not (root / "datasets" / f"{port.dataset_ref}{suffix}").is_file():
                    raise MissingReference(f"product:{product.id}", port.dataset_ref)
        registry.products[product.id] = product
        blob = "\n".join((product.id, product.title, product.description)).lower()
        registry._search_blobs[product.id] = blob

    rules = []
    priorities: dict[int, str] = {}
    for file, raw in _read_documents(root / "policies"):
        rule = _parse_policy(raw, file)
        if rule.rule_id in {r.rule_id for r in rules}:
            raise DuplicateId(rule.rule_id)
        if rule.priority in priorities:
            raise RegistryError(
                f"policy {rule.rule_id!r} reuses priority {rule.priority} "
                f"of {priorities[rule.priority]!r}"
            )
        priorities[rule.priority] = rule.rule_id
        rules.append(rule)
    registry.policies = tuple(sorted(rules, key=lambda r: r.priority))

    return registry


def tokenize_terms(terms: list[str]) -> list[str]:
    return [token for term in terms for token in term.split()]


def search_products(
    registry: Registry, terms: list[str], status_filter: str | None = None
) -> list[ProductSummary]:
    """AND-of-all-terms, case-insensitive substring search over id, title,
    and description. Results sorted by product id; summaries only.

    status_filter defaults to "active".
    """
    tokens = [t.lower() for t in tokenize_terms(terms)]
    if not tokens:
        raise ValueError("search terms must be non-empty after tokenization")
    status = status_filter or "active"
    results = []
    for product_id in sorted(registry.products):
        product = registry.products[product_id]
        if product.status != status:
            continue
        blob = registry._search_blobs[product_id]
        if all(token in blob for token in tokens):
            results.append(
                ProductSummary(product.id, product.title, product.description, product.owner_team)
            )
    return results


def list_products(registry: Registry, status_filter: str | None = None) -> list[ProductSummary]:
    """All products passing the status filter, as summaries sorted by id."""
    status = status_filter or "active"
    return [
        ProductSummary(p.id, p.title, p.description, p.owner_team)
        for p in (registry.products[k] for k in sorted(registry.products))
        if p.status == status
    ]


class NotFound(Exception):
    def __init__(self, what: str):
        super().__init__(f"no such entity: {what}")
        self.what = what


def get_product(registry: Registry, product_id: str, caller: User, request_store) -> ProductDetail:
    """Full product detail plus the caller's access status.

    request_store must expose access_status(requester_id, product_id) -> one
    of ACCESS_STATUSES; the gateway's request store satisfies this.
    """
    product = registry.products.get(product_id)
    if product is None:
        raise NotFound(product_id)
    return ProductDetail(
        product=product,
        contracts=registry.contracts_for(product),
        access_status=request_store.access_status(caller.id, product_id),
    )
