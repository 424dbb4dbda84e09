from core.nodes import (corrupt_corpus, denoise_corpus,
                        evaluate_corpus, should_continue)
from core.state_models import GraphState
from langgraph.graph import StateGraph, START, END


def create_graph_flow() -> StateGraph:
    """
    Create and configure the corrupt -> denoise -> evaluate graph.

    Returns:
        Compiled StateGraph ready for execution
    """
    graph_flow = StateGraph(GraphState)

    graph_flow.add_node("corrupt_corpus", corrupt_corpus)
    graph_flow.add_node("denoise_corpus", denoise_corpus)
    graph_flow.add_node("evaluate_corpus", evaluate_corpus)

    graph_flow.add_edge(START, "corrupt_corpus")

    graph_flow.add_conditional_edges(
        "corrupt_corpus",
        should_continue,
        {
            "continue": "denoise_corpus",
            "end": END
        }
    )

    graph_flow.add_conditional_edges(
        "denoise_corpus",
        should_continue,
        {
            "continue": "evaluate_corpus",
            "end": END
        }
    )

    graph_flow.add_edge("evaluate_corpus", END)

    return graph_flow.compile()
