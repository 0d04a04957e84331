"""OLAP cube operations on ordered labeled trees.

The package stacks four layers: a tree core (tree), pattern matching over
trees (pattern), ten collection operators (algebra), and the nine cube
operations composed from them (ops), with a multidimensional model
(model), canonical XML I/O (xmlio), a relational reference implementation
(oracle), a batch CLI (cli), and an HTTP service (service).
"""

from .algebra import (
    AggFunction,
    AppendAggregate,
    AttachCopyUnder,
    CopyValue,
    InsertNode,
    JoinSpec,
    MoveNode,
    OperatorError,
    OrderKey,
    ProjectionList,
    Report,
    SetValue,
    aggregate,
    copy_paste,
    delete_nodes,
    group,
    insert_nodes,
    join,
    parse_number,
    product,
    project,
    render_number,
    reorder,
    select,
    trace_capture,
)
from .model import (
    CubeCellView,
    CubeSchema,
    CubeValidationError,
    HierarchySet,
    HierarchyTree,
    LevelMember,
    ModelError,
    ValidationIssue,
    TreeCube,
    from_cells,
    hierarchy_from_tree,
    lookup_level,
    to_cells,
    validate,
)
from .ops import (
    OpRequest,
    OpResult,
    OpsError,
    UsageError,
    apply,
    cube_lattice,
    dice,
    drill_down,
    lattice_cells,
    pull,
    push,
    roll_up,
    rotate,
    slice_cube,
    switch,
)
from .oracle import (
    CompareReport,
    FactTable,
    FactTuple,
    compare,
    flatten,
    hierarchy_mappings,
    oracle_apply,
    oracle_cube,
)
from .pattern import (
    Axis,
    Embedding,
    PatternBuilder,
    PatternError,
    PatternTree,
    match,
    parse_pattern,
    witness,
    witness_projected,
)
from .tree import (
    DataTree,
    Node,
    TreeBuilder,
    TreeCollection,
    TreeError,
    build_tree,
    deep_copy,
    structural_eq,
    to_spec,
)
from .xmlio import (
    XmlFormatError,
    parse_facts,
    parse_hierarchy,
    parse_tree,
    serialize,
    serialize_cube,
    serialize_tree,
)

__version__ = "0.1.0"
