'''
LLM stage agents: one chat session per stage, a chat-completion client
(OpenAI-compatible HTTP endpoint or a deterministic mock) and the round loop
that queries the stages from the retailer upwards.
'''

import os, time
from dataclasses import dataclass, field
from typing import List

import openai

from configs import Configs
from src.exceptions import ConfigurationError, InvSimError, ParseError, \
        TransportError
from src.policies import CapacityFraction, heuristicOrder
from src.prompts import PromptFlags, parseAction, renderReformatRequest, \
        renderRoundPrompt, renderSystemMessage


########################### sessions ########################################

'''
Chat history of one stage agent. With keep_history off, every round starts
again from the system message only.
'''
@dataclass
class ChatSession:
    stage_index: int
    system_message: str
    keep_history: bool = True
    messages: List[tuple] = field(default_factory=list)

    def __post_init__(self):
        if not self.messages:
            self.messages = [('system', self.system_message)]

    def beginRound(self):
        if not self.keep_history:
            self.messages = [('system', self.system_message)]

    def addUser(self, text):
        self.messages.append(('user', text))

    def addReply(self, text):
        self.messages.append(('assistant', text))

    def payload(self):
        return [{'role': role, 'content': text} for role, text in self.messages]

    def __len__(self):
        return len(self.messages)


########################### clients #########################################

class ChatClient(object):
    '''
    context carries the structured round information (observation, period,
    scenario, downstream order, flags) so mock clients do not need to
    re-parse the prompt. HTTP clients ignore it.
    '''
    def complete(self, messages, model_name, temperature, timeout,
            context=None):
        raise NotImplementedError


'''
Deterministic client: replies with responder(messages, context)
'''
class MockClient(ChatClient):
    def __init__(self, responder):
        self.responder = responder
        self.name = getattr(responder, '__name__', 'mock')

    def complete(self, messages, model_name, temperature, timeout,
            context=None):
        return self.responder(messages, context)


class OpenAIChatClient(ChatClient):
    def __init__(self, endpoint=None, api_key_env='OPENAI_API_KEY',
            transport_retries=3, backoff=1.0):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.transport_retries = max(1, int(transport_retries))
        self.backoff = backoff
        self.name = 'openai'
        self._client = None

    # the underlying HTTP client is rebuilt lazily in worker processes
    def __getstate__(self):
        state = self.__dict__.copy()
        state['_client'] = None
        return state

    def client(self, timeout):
        if self._client is None:
            api_key = os.environ.get(self.api_key_env, '').strip()
            if not api_key:
                raise ConfigurationError('missing API credentials: environment '
                        'variable {} is not set'.format(self.api_key_env))
            self._client = openai.OpenAI(api_key=api_key,
                    base_url=self.endpoint or None, timeout=timeout)
        return self._client

    def complete(self, messages, model_name, temperature, timeout,
            context=None):
        last_err = None
        for attempt in range(self.transport_retries):
            try:
                resp = self.client(timeout).chat.completions.create(
                        model=model_name, messages=messages,
                        temperature=temperature, timeout=timeout)
                return resp.choices[0].message.content or ''
            except openai.OpenAIError as e:
                last_err = e
                Configs.warning('[chat] attempt {}/{} failed: {}'.format(
                    attempt + 1, self.transport_retries, repr(e)))
                if attempt + 1 < self.transport_retries:
                    time.sleep(self.backoff * (attempt + 1))
        Configs.error('[chat] giving up after {} attempts: {}'.format(
            self.transport_retries, repr(last_err)))
        raise TransportError('chat endpoint failed after {} attempts: '
                '{}'.format(self.transport_retries, last_err))


########################### mock responders #################################

_BASE_STOCK = CapacityFraction(1.0)

'''
Replies the base-stock order for the stage's observation, so an agent set
driven by it behaves exactly like the base-stock heuristic
'''
def baseStockResponder(messages, context):
    obs = context['obs']
    order = heuristicOrder(_BASE_STOCK, obs)
    menu = context['flags'].menu_for(obs.stage_index) \
            if context.get('flags') is not None else None
    if menu:
        # largest allowed order not above the base-stock order
        below = [x for x in menu if x <= order]
        order = max(below) if below else min(menu)
    return ('Reason: Ordering up to the full capacity of {} units given the '
            'inventory position.\n\nAction: [{}]').format(
                    obs.params.capacity, order)


'''
Retailer orders 4, every other stage orders its downstream order + 1
'''
def echoDownstreamResponder(messages, context):
    downstream = context.get('downstream_order')
    if context['obs'].stage_index == 0 or downstream is None:
        return 'Action: [4]'
    return 'Action: [{}]'.format(int(downstream) + 1)


MOCK_RESPONDERS = {
        'base-stock': baseStockResponder,
        'echo-downstream': echoDownstreamResponder,
        }


def makeMockClient(name):
    if name not in MOCK_RESPONDERS:
        raise ConfigurationError('unknown mock responder: {} (choose from '
                '{})'.format(name, ', '.join(MOCK_RESPONDERS)))
    return MockClient(MOCK_RESPONDERS[name])


########################### agent loop ######################################

@dataclass(frozen=True)
class LLMSettings:
    model: str = 'gpt-4'
    temperature: float = 1.0
    timeout: float = 60.0
    retry_limit: int = 3

    def toDict(self):
        return {'model': self.model, 'temperature': self.temperature,
                'timeout': self.timeout, 'retry_limit': self.retry_limit}


def _entry(period, stage, role, content):
    return {'period': period, 'stage': stage, 'role': role, 'content': content}


'''
Ask one stage for its order. Unparseable replies are answered with a
reformat request, up to retry_limit replies in total; after that the order
falls back to 0 and a warning entry is added to the transcript. The parsed
order is returned as is (the environment caps it, not the agent).

Returns (order, transcript entries of this decision).
'''
def agentDecide(session, client, obs, period, scenario, downstream_order=None,
        flags=None, settings=None):
    flags = PromptFlags() if flags is None else flags
    settings = LLMSettings() if settings is None else settings
    assert settings.retry_limit >= 1, 'retry_limit needs to be >= 1'
    stage = obs.stage_index
    menu = flags.menu_for(stage)
    context = {'obs': obs, 'period': period, 'scenario': scenario,
            'downstream_order': downstream_order, 'flags': flags}

    session.beginRound()
    prompt = renderRoundPrompt(obs, period, scenario, downstream_order, flags)
    delta = []
    last_err = None
    for attempt in range(settings.retry_limit):
        session.addUser(prompt)
        delta.append(_entry(period, stage, 'user', prompt))
        reply = client.complete(session.payload(), settings.model,
                settings.temperature, settings.timeout, context)
        session.addReply(reply)
        delta.append(_entry(period, stage, 'assistant', reply))
        try:
            return parseAction(reply, menu), delta
        except ParseError as e:
            last_err = e
            Configs.debug('[agent] stage {} round {} attempt {}: {}'.format(
                stage, period, attempt + 1, e))
            prompt = renderReformatRequest(menu)

    msg = 'stage {} round {}: no valid action after {} replies ({}), ' \
            'ordering 0'.format(stage + 1, period, settings.retry_limit,
                    last_err)
    Configs.warning('[agent] {}'.format(msg))
    delta.append(_entry(period, stage, 'warning', msg))
    return 0, delta


'''
One round: stages are asked in order 0..M-1, stage m >= 1 sees the order
stage m-1 has just chosen
'''
def roundOfActions(sessions, client, observations, period, scenario,
        flags=None, settings=None, transcripts=None):
    flags = PromptFlags() if flags is None else flags
    assert len(sessions) == len(observations), \
            '{} sessions for {} observations'.format(len(sessions),
                    len(observations))
    actions = []
    for m, (session, obs) in enumerate(zip(sessions, observations)):
        assert obs.period == period, \
                'stage {} observed at period {}, expected {}'.format(
                        m, obs.period, period)
        downstream = actions[m - 1] \
                if m >= 1 and flags.include_downstream else None
        try:
            order, delta = agentDecide(session, client, obs, period, scenario,
                    downstream, flags, settings)
        except InvSimError as e:
            e.stage_index = m
            raise
        if transcripts is not None:
            transcripts[m].extend(delta)
        actions.append(order)
    return actions


'''
Policy bound to all stages at once, used by the episode runner in place of
per-stage policies
'''
class LLMAgentSet(object):
    def __init__(self, client, flags=None, settings=None, name='llm'):
        self.client = client
        self.flags = PromptFlags() if flags is None else flags
        self.settings = LLMSettings() if settings is None else settings
        self.name = name
        self.sessions = []
        self.transcripts = []

    def reset(self, config):
        self.config = config
        M = config.num_stages
        self.sessions = [ChatSession(m, renderSystemMessage(m, M),
            self.flags.keep_history) for m in range(M)]
        self.transcripts = [[_entry(0, m, 'system', s.system_message)]
                for m, s in enumerate(self.sessions)]

    def act(self, observations, period):
        return roundOfActions(self.sessions, self.client, observations,
                period, self.config, self.flags, self.settings,
                self.transcripts)
