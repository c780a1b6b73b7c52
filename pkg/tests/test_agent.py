import types
from unittest import mock

import openai
import pytest

from src.agent import ChatSession, MockClient, OpenAIChatClient, \
        LLMSettings, LLMAgentSet, agentDecide, roundOfActions, \
        baseStockResponder, echoDownstreamResponder, makeMockClient
from src.environment import observe, observeAll, reset
from src.exceptions import ConfigurationError, TransportError
from src.harness import PolicySpec, runEpisode
from src.prompts import PromptFlags, renderSystemMessage
from src.scenarios import SCENARIO_NAMES, presetScenario


def _replies(*texts):
    '''responder replaying texts in order, the last one forever'''
    calls = []

    def responder(messages, context):
        calls.append(messages)
        return texts[min(len(calls) - 1, len(texts) - 1)]
    responder.calls = calls
    return responder


def _session(stage=0, keep_history=True):
    return ChatSession(stage, renderSystemMessage(stage, 4), keep_history)


########################### sessions ########################################

def test_history_grows_two_messages_per_round(constant):
    session = _session()
    client = MockClient(_replies('[4]'))
    obs = observe(reset(constant, 0), 0)
    for t in range(1, 4):
        agentDecide(session, client, obs, t, constant)
        assert len(session) == 1 + 2 * t
    assert [role for role, _ in session.messages[:3]] == \
            ['system', 'user', 'assistant']


def test_no_history_keeps_three_messages(constant):
    session = _session(keep_history=False)
    client = MockClient(_replies('[4]'))
    obs = observe(reset(constant, 0), 0)
    for t in range(1, 4):
        agentDecide(session, client, obs, t, constant,
                flags=PromptFlags(keep_history=False))
        assert len(session) == 3


########################### decisions #######################################

def test_decide_single_exchange(constant):
    session = _session()
    order, delta = agentDecide(session, MockClient(_replies('[8]')),
            observe(reset(constant, 0), 0), 1, constant)
    assert order == 8
    assert [e['role'] for e in delta] == ['user', 'assistant']


def test_decide_retries_after_unparseable_replies(constant):
    responder = _replies('I am not sure.', 'Maybe eight?', 'Action: [2]')
    session = _session()
    order, delta = agentDecide(session, MockClient(responder),
            observe(reset(constant, 0), 0), 1, constant,
            settings=LLMSettings(retry_limit=3))
    assert order == 2
    assert len(responder.calls) == 3
    assert [e['role'] for e in delta] == ['user', 'assistant'] * 3
    assert 'did not contain a valid action' in delta[2]['content']


def test_decide_falls_back_to_zero(constant):
    responder = _replies('no idea')
    order, delta = agentDecide(_session(), MockClient(responder),
            observe(reset(constant, 0), 0), 1, constant,
            settings=LLMSettings(retry_limit=3))
    assert order == 0
    assert len(responder.calls) == 3
    assert delta[-1]['role'] == 'warning'


def test_decide_menu_violation_is_retried(constant):
    flags = PromptFlags(restricted_menu=(0, 4, 8))
    order, _ = agentDecide(_session(), MockClient(_replies('[5]', '[4]')),
            observe(reset(constant, 0), 0), 1, constant, flags=flags)
    assert order == 4


def test_decide_does_not_clamp(constant):
    order, _ = agentDecide(_session(), MockClient(_replies('[99]')),
            observe(reset(constant, 0), 0), 1, constant)
    assert order == 99


########################### rounds ##########################################

def test_round_propagates_downstream_orders(constant):
    sessions = [_session(m) for m in range(4)]
    client = MockClient(echoDownstreamResponder)
    actions = roundOfActions(sessions, client, observeAll(reset(constant, 0)),
            1, constant, PromptFlags())
    assert actions == [4, 5, 6, 7]
    assert 'from the stage 3 for this round is 6.' in sessions[3].messages[1][1]


def test_round_without_downstream(constant):
    sessions = [_session(m) for m in range(4)]
    client = MockClient(echoDownstreamResponder)
    flags = PromptFlags(include_downstream=False)
    actions = roundOfActions(sessions, client, observeAll(reset(constant, 0)),
            1, constant, flags)
    assert actions == [4, 4, 4, 4]
    assert all('Your downstream order' not in s.messages[1][1]
            for s in sessions)


def test_round_queries_stages_in_order():
    config = presetScenario('constant')
    config = type(config)('two', 12, config.stages[:2], config.demand)
    seen = []

    def responder(messages, context):
        seen.append(context['obs'].stage_index)
        return '[1]'
    sessions = [ChatSession(m, renderSystemMessage(m, 2)) for m in range(2)]
    roundOfActions(sessions, MockClient(responder),
            observeAll(reset(config, 0)), 1, config)
    assert seen == [0, 1]


def test_round_attaches_stage_to_errors(constant):
    def responder(messages, context):
        if context['obs'].stage_index == 2:
            raise TransportError('endpoint down')
        return '[1]'
    sessions = [_session(m) for m in range(4)]
    with pytest.raises(TransportError) as info:
        roundOfActions(sessions, MockClient(responder),
                observeAll(reset(constant, 0)), 1, constant)
    assert info.value.stage_index == 2


########################### clients #########################################

def _completion(text):
    message = types.SimpleNamespace(content=text)
    return types.SimpleNamespace(choices=[types.SimpleNamespace(
        message=message)])


def test_openai_client_request(monkeypatch):
    monkeypatch.setenv('OPENAI_API_KEY', 'test-key')
    with mock.patch('openai.OpenAI') as factory:
        factory.return_value.chat.completions.create.return_value = \
                _completion('Action: [3]')
        client = OpenAIChatClient(endpoint='http://localhost:8000/v1')
        text = client.complete([{'role': 'user', 'content': 'hi'}], 'gpt-4',
                0.5, 10.)
    assert text == 'Action: [3]'
    factory.assert_called_once_with(api_key='test-key',
            base_url='http://localhost:8000/v1', timeout=10.)
    kwargs = factory.return_value.chat.completions.create.call_args.kwargs
    assert kwargs['model'] == 'gpt-4' and kwargs['temperature'] == 0.5
    assert kwargs['messages'] == [{'role': 'user', 'content': 'hi'}]


def test_openai_client_retries_then_fails(monkeypatch):
    monkeypatch.setenv('OPENAI_API_KEY', 'test-key')
    with mock.patch('openai.OpenAI') as factory:
        create = factory.return_value.chat.completions.create
        create.side_effect = [openai.OpenAIError('transient'),
                _completion('[1]')]
        client = OpenAIChatClient(transport_retries=2, backoff=0.)
        assert client.complete([], 'gpt-4', 1., 5.) == '[1]'

        create.side_effect = openai.OpenAIError('down')
        client = OpenAIChatClient(transport_retries=3, backoff=0.)
        with pytest.raises(TransportError):
            client.complete([], 'gpt-4', 1., 5.)
        assert create.call_count == 2 + 3


def test_openai_client_needs_credentials(monkeypatch):
    monkeypatch.delenv('OPENAI_API_KEY', raising=False)
    with pytest.raises(ConfigurationError):
        OpenAIChatClient().complete([], 'gpt-4', 1., 5.)


def test_unknown_mock_responder():
    with pytest.raises(ConfigurationError):
        makeMockClient('oracle')


########################### equivalence #####################################

@pytest.mark.parametrize('name', SCENARIO_NAMES)
def test_base_stock_mock_matches_heuristic(name):
    config = presetScenario(name)
    heuristic = PolicySpec.preset('base-stock')
    for seed in range(5):
        agents = LLMAgentSet(MockClient(baseStockResponder))
        llm = runEpisode(config, agents, seed)
        ref = runEpisode(config, heuristic.build(config), seed)
        assert llm.valid
        assert llm.orders == ref.orders
        assert llm.episode_reward == ref.episode_reward


def test_agent_set_keeps_transcripts(constant):
    agents = LLMAgentSet(makeMockClient('base-stock'))
    record = runEpisode(constant, agents, 0)
    assert len(record.transcripts) == 4
    # system message, then one user/assistant pair per round
    assert len(record.transcripts[0]) == 1 + 2 * 12
    assert record.transcripts[0][0]['role'] == 'system'
