"""
Line-delimited JSON dataset files: one GraphInstance per line.
Floats are written in shortest round-trip form, so reals reload exactly.
"""
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, ValidationError

from tgt.core.exceptions import DatasetFormatError, GraphDataError
from tgt.data.graph import GraphInstance

logger = structlog.get_logger(__name__)


class GraphRecord(BaseModel):
    """Wire form of a GraphInstance"""

    model_config = ConfigDict(extra="forbid")

    graph_id: int
    node_types: List[int]
    edges: List[Tuple[int, int, int]]
    hop: List[List[int]]
    max_hops: int
    coords: Optional[List[List[float]]] = None
    target_distances: Optional[List[List[float]]] = None
    target_scalar: Optional[float] = None
    edge_labels: Optional[List[List[int]]] = None
    node_features: Optional[List[List[float]]] = None
    metadata: Dict[str, Any] = {}

    @classmethod
    def from_graph(cls, graph: GraphInstance) -> "GraphRecord":
        def listed(array: Optional[np.ndarray]) -> Optional[list]:
            return None if array is None else np.asarray(array).tolist()

        return cls(
            graph_id=graph.graph_id,
            node_types=graph.node_types.tolist(),
            edges=[tuple(e) for e in graph.edge_list.tolist()],
            hop=graph.hop.tolist(),
            max_hops=graph.max_hops,
            coords=listed(graph.coords),
            target_distances=listed(graph.target_distances),
            target_scalar=None if graph.target_scalar is None else float(graph.target_scalar),
            edge_labels=listed(graph.edge_labels),
            node_features=listed(graph.node_features),
            metadata=dict(graph.metadata),
        )

    def to_graph(self) -> GraphInstance:
        def array(values: Optional[list], dtype: type) -> Optional[np.ndarray]:
            return None if values is None else np.asarray(values, dtype=dtype)

        n = len(self.node_types)
        graph = GraphInstance(
            node_types=np.asarray(self.node_types, dtype=np.int64),
            edge_list=np.asarray(self.edges, dtype=np.int64).reshape(-1, 3),
            hop=np.asarray(self.hop, dtype=np.int64).reshape(n, n),
            max_hops=self.max_hops,
            coords=array(self.coords, np.float64),
            target_distances=array(self.target_distances, np.float64),
            target_scalar=self.target_scalar,
            edge_labels=array(self.edge_labels, np.int64),
            node_features=array(self.node_features, np.float64),
            graph_id=self.graph_id,
            metadata=dict(self.metadata),
        )
        graph.validate()
        return graph


def write_dataset(path: Union[str, Path], graphs: Iterable[GraphInstance]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for graph in graphs:
            f.write(GraphRecord.from_graph(graph).model_dump_json())
            f.write("\n")
            count += 1
    logger.info("dataset_written", path=str(path), records=count)
    return count


def read_dataset(path: Union[str, Path]) -> List[GraphInstance]:
    path = Path(path)
    if not path.is_file():
        raise GraphDataError(f"dataset not found: {path}", path=str(path))
    graphs = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                graphs.append(GraphRecord.model_validate_json(line).to_graph())
            except (ValidationError, ValueError, GraphDataError) as e:
                reason = e.errors()[0]["msg"] if isinstance(e, ValidationError) else str(e)
                raise DatasetFormatError(str(path), line_number, reason) from e
    logger.info("dataset_read", path=str(path), records=len(graphs))
    return graphs
